"""Gaussian-mixture PHD filter with state-dependent detection probability.

The filter propagates a Gaussian-mixture approximation of the first-moment
(intensity) function of the multi-target state.  Prediction pushes each
component through survival / spawn / birth; the update splits the predicted
intensity into a missed-detection part and one detection part per
measurement.

The detection probability is a constant plus Gaussian terms in a projection
of the state,

    p_D(x) = w0 + sum_j w_j N(D_j x; c_j, S_j),

which covers both a detection model written directly over the full state
(D = identity) and one that depends only on the observed position (D = the
observation matrix).  Because p_D varies over the state space, the exact
missed-detection intensity u(x)(1 - p_D(x)) is not a nonnegative Gaussian
mixture; instead its exact total mass

    T = mass(predicted) - sum_ij w_i w_j q_ij

is redistributed over the predicted components in proportion to their
plug-in missed weights (1 - p_D(m_i)) w_i, which keeps every weight
nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussmix import GaussianMixture, _validate_cov, log_gauss
from .pointprocess import PointPattern

_EPS_MASS = 1e-12


def _validate_matrix(name: str, value, shape=None) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {arr.shape}")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _validate_psd(name: str, value) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if not np.allclose(arr, arr.T, rtol=1e-9, atol=1e-9):
        raise ValueError(f"{name} is not symmetric")
    arr = 0.5 * (arr + arr.T)
    scale = max(1.0, float(np.abs(arr).max()))
    if np.linalg.eigvalsh(arr).min() < -1e-9 * scale:
        raise ValueError(f"{name} is not positive semidefinite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MotionModel:
    """Linear Gaussian dynamics x' ~ N(F x, Q) with survival probability p_S."""

    transition: np.ndarray
    process_noise: np.ndarray
    survival_prob: float = 1.0

    def __post_init__(self):
        f = _validate_matrix("transition", self.transition)
        if f.shape[0] != f.shape[1]:
            raise ValueError(f"transition must be square, got {f.shape}")
        object.__setattr__(self, "transition", f)
        object.__setattr__(
            self, "process_noise", _validate_psd("process_noise", self.process_noise)
        )
        if self.process_noise.shape != f.shape:
            raise ValueError("process_noise shape does not match transition")
        ps = float(self.survival_prob)
        if not (0.0 <= ps <= 1.0):
            raise ValueError(f"survival_prob must be in [0, 1], got {ps!r}")
        object.__setattr__(self, "survival_prob", ps)

    @property
    def dim(self) -> int:
        return self.transition.shape[0]


@dataclass(frozen=True)
class SpawnTerm:
    """One spawn kernel: existing targets seed N(F_b x + d_b, Q_b) with weight w_b."""

    weight: float
    transition: np.ndarray
    offset: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        w = float(self.weight)
        if not (w >= 0.0 and math.isfinite(w)):
            raise ValueError(f"spawn weight must be finite and >= 0, got {w!r}")
        object.__setattr__(self, "weight", w)
        f = _validate_matrix("spawn transition", self.transition)
        if f.shape[0] != f.shape[1]:
            raise ValueError(f"spawn transition must be square, got {f.shape}")
        object.__setattr__(self, "transition", f)
        off = np.array(self.offset, dtype=float).reshape(-1)
        if off.size != f.shape[0] or not np.all(np.isfinite(off)):
            raise ValueError("spawn offset does not match transition dimension")
        off.setflags(write=False)
        object.__setattr__(self, "offset", off)
        q = _validate_psd("spawn noise", self.noise)
        if q.shape != f.shape:
            raise ValueError("spawn noise shape does not match transition")
        object.__setattr__(self, "noise", q)


@dataclass(frozen=True)
class BirthSpawnModel:
    """Birth intensity plus optional spawn kernels."""

    birth: GaussianMixture
    spawn_terms: tuple = ()

    def __post_init__(self):
        if not isinstance(self.birth, GaussianMixture):
            raise ValueError("birth must be a GaussianMixture")
        terms = tuple(self.spawn_terms)
        for i, term in enumerate(terms):
            if not isinstance(term, SpawnTerm):
                raise ValueError(f"spawn_terms[{i}] is not a SpawnTerm")
            if term.transition.shape[0] != self.birth.dim:
                raise ValueError(f"spawn_terms[{i}] dimension does not match birth")
        object.__setattr__(self, "spawn_terms", terms)


@dataclass(frozen=True)
class MeasModel:
    """Linear Gaussian sensor z ~ N(H x, R) plus uniform Poisson clutter.

    ``clutter_rate`` is points per unit observation volume; ``clutter_region``
    is the axis-aligned box carrying the clutter (None means the whole
    observation space, in which case only the rate enters the update).
    """

    observation: np.ndarray
    noise: np.ndarray
    clutter_rate: float = 0.0
    clutter_region: np.ndarray | None = None

    def __post_init__(self):
        h = _validate_matrix("observation", self.observation)
        object.__setattr__(self, "observation", h)
        object.__setattr__(self, "noise", _validate_cov(self.noise, h.shape[0]))
        rate = float(self.clutter_rate)
        if not (rate >= 0.0 and math.isfinite(rate)):
            raise ValueError(f"clutter_rate must be finite and >= 0, got {rate!r}")
        object.__setattr__(self, "clutter_rate", rate)
        if self.clutter_region is not None:
            box = np.array(self.clutter_region, dtype=float)
            if box.shape != (h.shape[0], 2) or not np.all(np.isfinite(box)):
                raise ValueError(
                    f"clutter_region must be ({h.shape[0]}, 2) [low, high] rows"
                )
            if np.any(box[:, 0] >= box[:, 1]):
                raise ValueError("clutter_region rows must satisfy low < high")
            box.setflags(write=False)
            object.__setattr__(self, "clutter_region", box)

    @property
    def state_dim(self) -> int:
        return self.observation.shape[1]

    @property
    def meas_dim(self) -> int:
        return self.observation.shape[0]


def clutter_intensity(meas: MeasModel, zs: np.ndarray) -> np.ndarray:
    """Clutter intensity at measurement locations: the rate inside the region, 0 outside."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    if meas.clutter_region is None:
        return np.full(zs.shape[0], meas.clutter_rate)
    box = meas.clutter_region
    inside = np.all((zs >= box[:, 0]) & (zs <= box[:, 1]), axis=1)
    return np.where(inside, meas.clutter_rate, 0.0)


@dataclass(frozen=True)
class DetectionTerm:
    """One Gaussian detection term w * N(D x; c, S)."""

    weight: float
    center: np.ndarray
    cov: np.ndarray
    projection: np.ndarray

    def __post_init__(self):
        w = float(self.weight)
        if not (w >= 0.0 and math.isfinite(w)):
            raise ValueError(f"detection term weight must be finite and >= 0, got {w!r}")
        object.__setattr__(self, "weight", w)
        c = np.array(self.center, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("detection term center has non-finite entries")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "cov", _validate_cov(self.cov, c.size))
        d = _validate_matrix("detection projection", self.projection)
        if d.shape[0] != c.size:
            raise ValueError(
                f"projection rows {d.shape[0]} do not match center dimension {c.size}"
            )
        object.__setattr__(self, "projection", d)

    @property
    def state_dim(self) -> int:
        return self.projection.shape[1]


@dataclass(frozen=True)
class DetectionProfile:
    """State-dependent detection probability w0 + sum_j w_j N(D_j x; c_j, S_j).

    Construction probes the profile (term peaks via pseudo-inverse preimages,
    the origin, and pairwise midpoints) and rejects profiles that exceed 1
    there; the update additionally rejects any profile whose excess shows up
    as negative missed-detection mass.
    """

    constant: float = 0.0
    terms: tuple = ()

    def __post_init__(self):
        w0 = float(self.constant)
        if not (0.0 <= w0 <= 1.0):
            raise ValueError(f"constant detection term must be in [0, 1], got {w0!r}")
        object.__setattr__(self, "constant", w0)
        terms = tuple(self.terms)
        for i, term in enumerate(terms):
            if not isinstance(term, DetectionTerm):
                raise ValueError(f"terms[{i}] is not a DetectionTerm")
        dims = {t.state_dim for t in terms}
        if len(dims) > 1:
            raise ValueError(f"detection terms disagree on state dimension: {sorted(dims)}")
        object.__setattr__(self, "terms", terms)
        if terms:
            d = terms[0].state_dim
            probes = [np.zeros(d)]
            peaks = [np.linalg.pinv(t.projection) @ t.center for t in terms]
            probes.extend(peaks)
            for a in range(len(peaks)):
                for b in range(a + 1, len(peaks)):
                    probes.append(0.5 * (peaks[a] + peaks[b]))
            values = self.evaluate(np.stack(probes))
            if values.max() > 1.0 + 1e-9:
                raise ValueError(
                    f"detection probability reaches {values.max():.6g} > 1 at a probe point"
                )

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        """p_D at each state row; shape (n,)."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        out = np.full(states.shape[0], self.constant)
        for term in self.terms:
            if states.shape[1] != term.state_dim:
                raise ValueError(
                    f"states have dimension {states.shape[1]}, profile expects {term.state_dim}"
                )
            y = states @ term.projection.T
            out = out + term.weight * np.exp(log_gauss(y - term.center, term.cov))
        return out


def detection_probability(states, profile: DetectionProfile) -> np.ndarray:
    return profile.evaluate(states)


@dataclass(frozen=True)
class GmPhdState:
    """Posterior intensity at a timestep."""

    intensity: GaussianMixture
    timestep: int = 0

    def __post_init__(self):
        if not isinstance(self.intensity, GaussianMixture):
            raise ValueError("intensity must be a GaussianMixture")
        object.__setattr__(self, "timestep", int(self.timestep))


def phd_predict(
    state: GmPhdState, motion: MotionModel, birth_spawn: BirthSpawnModel
) -> GaussianMixture:
    """Predicted intensity: survival + spawn + birth.

    Output component order: survivors in prior order, then one block per
    spawn term (prior order within each block), then the birth components.
    Predicted mass is p_S * mass + mass * sum(spawn weights) + birth mass.
    """
    prior = state.intensity
    d = motion.dim
    if prior.dim != d:
        raise ValueError(f"prior dimension {prior.dim} does not match motion {d}")
    if birth_spawn.birth.dim != d:
        raise ValueError(f"birth dimension {birth_spawn.birth.dim} does not match motion {d}")
    f = motion.transition
    q = motion.process_noise
    weights = [motion.survival_prob * prior.weights]
    means = [prior.means @ f.T]
    covs = [np.einsum("ab,ibc,dc->iad", f, prior.covs, f) + q]
    for term in birth_spawn.spawn_terms:
        fb, db, qb = term.transition, term.offset, term.noise
        weights.append(term.weight * prior.weights)
        means.append(prior.means @ fb.T + db)
        covs.append(np.einsum("ab,ibc,dc->iad", fb, prior.covs, fb) + qb)
    weights.append(birth_spawn.birth.weights)
    means.append(birth_spawn.birth.means)
    covs.append(birth_spawn.birth.covs)
    w = np.concatenate(weights)
    if w.size == 0:
        return GaussianMixture.empty(d)
    cc = np.concatenate([c.reshape(-1, d, d) for c in covs])
    cc = 0.5 * (cc + np.swapaxes(cc, -1, -2))
    return GaussianMixture(w, np.concatenate([m.reshape(-1, d) for m in means]), cc)


def _condition_on_terms(predicted: GaussianMixture, profile: DetectionProfile):
    """Per (component, detection-term) conditioning.

    Returns stacked arrays (weights, means, covs) over the j = 0 constant
    slot followed by each Gaussian term, each block in predicted-component
    order.  For j = 0 the component passes through with q = 1; for a Gaussian
    term, N(x; m, P) N(D x; c, S) = q N(x; m', P') with
    q = N(c; D m, D P D' + S), m' = m + K (c - D m), P' = (I - K D) P,
    K = P D' (D P D' + S)^-1.
    """
    w, m, p = predicted.weights, predicted.means, predicted.covs
    d = predicted.dim
    blocks_w = [profile.constant * w]
    blocks_m = [m]
    blocks_p = [p]
    eye = np.eye(d)
    for term in profile.terms:
        dmat, c, s = term.projection, term.center, term.cov
        dm = m @ dmat.T
        dp = np.einsum("ab,ibc->iac", dmat, p)
        s_ij = np.einsum("iab,cb->iac", dp, dmat) + s
        q = np.exp(log_gauss(c - dm, s_ij))
        try:
            gain = np.swapaxes(np.linalg.solve(s_ij, dp), -1, -2)
        except np.linalg.LinAlgError:
            raise ValueError("singular innovation covariance in detection conditioning") from None
        m1 = m + np.einsum("iab,ib->ia", gain, c - dm)
        shrink = eye - np.einsum("iab,bc->iac", gain, dmat)
        p1 = np.einsum("iab,ibc->iac", shrink, p)
        p1 = 0.5 * (p1 + np.swapaxes(p1, -1, -2))
        blocks_w.append(term.weight * w * q)
        blocks_m.append(m1)
        blocks_p.append(p1)
    return (
        np.concatenate(blocks_w),
        np.concatenate(blocks_m),
        np.concatenate(blocks_p),
    )


def phd_update(
    predicted: GaussianMixture,
    measurements: PointPattern,
    detection: DetectionProfile,
    meas: MeasModel,
) -> GaussianMixture:
    """Bayes update of the predicted intensity against one measurement set.

    Posterior = missed-detection intensity + one detection intensity per
    measurement.  Component order: the missed block (predicted order), then
    per measurement (input order) the conditioned blocks from
    _condition_on_terms.  Posterior mass equals T + sum of per-measurement
    detection masses, each of the latter in [0, 1].
    """
    d = predicted.dim
    if meas.state_dim != d:
        raise ValueError(f"observation matrix expects state dim {meas.state_dim}, got {d}")
    if measurements.dim != meas.meas_dim:
        raise ValueError(
            f"measurements have dimension {measurements.dim}, model has {meas.meas_dim}"
        )
    if len(predicted) == 0:
        return GaussianMixture.empty(d)
    w_cond, m_cond, p_cond = _condition_on_terms(predicted, detection)

    # Missed detections: exact mass T spread over predicted components in
    # proportion to their plug-in missed weights.
    mass = float(predicted.weights.sum())
    detected_mass = float(w_cond.sum())
    t_mass = mass - detected_mass
    if t_mass < -1e-9:
        raise ValueError(
            f"negative missed-detection mass {t_mass:.3g}: detection profile exceeds 1"
        )
    t_mass = max(t_mass, 0.0)
    pd_at_means = detection.evaluate(predicted.means)
    w_mu = np.maximum(1.0 - pd_at_means, 0.0) * predicted.weights
    sum_mu = float(w_mu.sum())
    if t_mass <= _EPS_MASS or sum_mu <= _EPS_MASS:
        w_missed = np.zeros(len(predicted))
    else:
        w_missed = w_mu * (t_mass / sum_mu)

    nz = len(measurements)
    if nz == 0:
        out_w, out_m, out_p = w_missed, predicted.means, predicted.covs
    else:
        h, r = meas.observation, meas.noise
        hm = m_cond @ h.T
        hp = np.einsum("ab,ibc->iac", h, p_cond)
        s2 = np.einsum("iab,cb->iac", hp, h) + r
        try:
            gain = np.swapaxes(np.linalg.solve(s2, hp), -1, -2)
        except np.linalg.LinAlgError:
            raise ValueError("singular innovation covariance in measurement update") from None
        shrink = np.eye(d) - np.einsum("iab,bc->iac", gain, h)
        p2 = np.einsum("iab,ibc->iac", shrink, p_cond)
        p2 = 0.5 * (p2 + np.swapaxes(p2, -1, -2))
        innov = measurements.points[None, :, :] - hm[:, None, :]
        qz = np.exp(log_gauss(innov, s2[:, None, :, :]))
        num = w_cond[:, None] * qz
        denom = clutter_intensity(meas, measurements.points) + num.sum(axis=0)
        w_det = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), 0.0)
        m_det = m_cond[:, None, :] + np.einsum("iab,izb->iza", gain, innov)
        out_w = np.concatenate([w_missed, w_det.T.reshape(-1)])
        out_m = np.concatenate([predicted.means, np.swapaxes(m_det, 0, 1).reshape(-1, d)])
        out_p = np.concatenate([predicted.covs, np.tile(p2, (nz, 1, 1))])
    if t_mass > _EPS_MASS and sum_mu > _EPS_MASS:
        assert abs(float(w_missed.sum()) - t_mass) <= 1e-9 * max(1.0, mass)
    return GaussianMixture(out_w, out_m, out_p)


def extract_states(intensity: GaussianMixture, threshold: float = 0.5) -> PointPattern:
    """Means of components with weight strictly above ``threshold``."""
    threshold = float(threshold)
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold!r}")
    keep = intensity.weights > threshold
    return PointPattern(intensity.means[keep], dim=intensity.dim)
