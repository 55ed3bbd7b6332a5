"""Gaussian and Gaussian-mixture primitives.

Everything downstream (divergences, the PHD filter, the controller) reduces to
a few operations on weighted sums of multivariate Gaussians: pointwise
evaluation, L2 inner products via the identity

    int N(x; m0, P0) N(x; m1, P1) dx = N(m0; m1, P0 + P1),

moment-matched pruning/merging, and coordinate scaling.  Mixtures are stored
as flat arrays (weights, means, covariances) so all of these batch through
numpy's stacked linear algebra; the simulation loop evaluates pairwise
Gaussian tables with tens of thousands of entries per step and a component
loop would dominate the runtime.

All evaluation happens in log space through a Cholesky factorization, so
ill-scaled but positive-definite covariances (entries around 1e6 show up in
the sensor model) stay accurate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class HyperVolumeUnit:
    """Numeric value of the unit hyper-volume K of the single-point space.

    The Poisson process density is taken with respect to a dimensionless
    reference measure, which leaves one free constant: the measure K assigns
    to the unit cell of the state space.  Divergences that depend on the
    reference measure scale linearly in ``k``; set ``k = s**d`` when
    rescaling coordinates by ``s`` to keep them invariant.
    """

    k: float = 1.0

    def __post_init__(self):
        k = float(self.k)
        if not math.isfinite(k) or k <= 0.0:
            raise ValueError(f"unit hyper-volume must be finite and > 0, got {self.k!r}")
        object.__setattr__(self, "k", k)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _validate_cov(cov, dim: int | None = None) -> np.ndarray:
    """Return a symmetrized, read-only copy of ``cov`` or raise ValueError."""
    c = np.array(cov, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"covariance must be a square matrix, got shape {c.shape}")
    if dim is not None and c.shape[0] != dim:
        raise ValueError(f"covariance dimension {c.shape[0]} does not match {dim}")
    if not np.all(np.isfinite(c)):
        raise ValueError("covariance has non-finite entries")
    if not np.allclose(c, c.T, rtol=1e-9, atol=1e-9):
        raise ValueError("covariance is not symmetric")
    c = 0.5 * (c + c.T)
    try:
        np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        raise ValueError("covariance is not positive definite") from None
    return _frozen(c)


@dataclass(frozen=True)
class Gaussian:
    """A single multivariate normal, mean (d,) and SPD covariance (d, d)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        if mean.ndim != 1:
            raise ValueError(f"mean must be a vector, got shape {mean.shape}")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean has non-finite entries")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _validate_cov(self.cov, mean.size))

    @property
    def dim(self) -> int:
        return self.mean.size


class GaussianMixture:
    """Weighted sum of Gaussians, stored as stacked arrays.

    weights: (n,) nonnegative; means: (n, d); covs: (n, d, d) each SPD.
    Zero-weight components are legal; they contribute nothing to evaluation,
    mass, or inner products, but are carried through until pruned.
    Instances are immutable; operations return new mixtures.
    """

    __slots__ = ("weights", "means", "covs")

    def __init__(self, weights, means, covs):
        w = np.array(weights, dtype=float).reshape(-1)
        m = np.array(means, dtype=float)
        c = np.array(covs, dtype=float)
        n = w.size
        if n == 0:
            # Empty mixtures keep an explicit dimension via the array shapes.
            if m.ndim != 2 or m.shape[0] != 0:
                raise ValueError("empty mixture needs means of shape (0, d); use GaussianMixture.empty")
            d = m.shape[1]
            c = c.reshape(0, d, d)
        else:
            m = np.atleast_2d(m)
            if m.shape[0] != n:
                raise ValueError(f"{n} weights but {m.shape[0]} means")
            d = m.shape[1]
            if c.shape != (n, d, d):
                raise ValueError(f"covs must have shape {(n, d, d)}, got {c.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights have non-finite entries")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        if not np.all(np.isfinite(m)):
            raise ValueError("means have non-finite entries")
        if not np.all(np.isfinite(c)):
            raise ValueError("covariances have non-finite entries")
        if n:
            if not np.allclose(c, np.swapaxes(c, -1, -2), rtol=1e-9, atol=1e-9):
                raise ValueError("covariances are not symmetric")
            c = 0.5 * (c + np.swapaxes(c, -1, -2))
            try:
                np.linalg.cholesky(c)
            except np.linalg.LinAlgError:
                raise ValueError("covariances are not positive definite") from None
        self.weights = _frozen(w)
        self.means = _frozen(m)
        self.covs = _frozen(c)

    @classmethod
    def empty(cls, dim: int) -> "GaussianMixture":
        return cls(np.zeros(0), np.zeros((0, dim)), np.zeros((0, dim, dim)))

    @classmethod
    def from_components(cls, components) -> "GaussianMixture":
        """Build from an iterable of (weight, Gaussian) pairs (must be nonempty)."""
        comps = list(components)
        if not comps:
            raise ValueError("from_components needs at least one component; use empty(dim)")
        w = [float(wi) for wi, _ in comps]
        m = [g.mean for _, g in comps]
        c = [g.cov for _, g in comps]
        return cls(w, np.stack(m), np.stack(c))

    @classmethod
    def single(cls, weight: float, mean, cov) -> "GaussianMixture":
        return cls.from_components([(weight, Gaussian(mean, cov))])

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def __len__(self) -> int:
        return self.weights.size

    def components(self) -> list[tuple[float, Gaussian]]:
        return [
            (float(w), Gaussian(m, c))
            for w, m, c in zip(self.weights, self.means, self.covs)
        ]

    def __repr__(self) -> str:
        return f"GaussianMixture(n={len(self)}, dim={self.dim}, mass={mixture_mass(self):.6g})"


# ---------------------------------------------------------------------------
# batched Gaussian evaluation


def _forward_sub(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L y = b for batched lower-triangular L (..., d, d), b (..., d).

    d is small (<= 4 in the tracking scenario) so an explicit loop over rows,
    vectorized across the batch, beats a general batched solve.
    """
    d = L.shape[-1]
    y = np.empty(np.broadcast_shapes(L.shape[:-2] + (d,), b.shape), dtype=float)
    b = np.broadcast_to(b, y.shape)
    for i in range(d):
        acc = b[..., i]
        if i:
            acc = acc - np.einsum("...j,...j->...", L[..., i, :i], y[..., :i])
        y[..., i] = acc / L[..., i, i]
    return y


def log_gauss(diffs: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """log N(diff; 0, C) for batched diffs (..., d) and covariances (..., d, d)."""
    diffs = np.asarray(diffs, dtype=float)
    covs = np.asarray(covs, dtype=float)
    d = diffs.shape[-1]
    try:
        chol = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        raise ValueError("covariance in batched evaluation is not positive definite") from None
    y = _forward_sub(chol, diffs)
    maha = np.einsum("...i,...i->...", y, y)
    logdet_half = np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(axis=-1)
    return -0.5 * (maha + d * _LOG_2PI) - logdet_half


def gauss_log_eval(x, g: Gaussian) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != g.dim:
        raise ValueError(f"point has dimension {x.size}, Gaussian has {g.dim}")
    return float(log_gauss(x - g.mean, g.cov))


def gauss_eval(x, g: Gaussian) -> float:
    """Density of ``g`` at point ``x``."""
    return math.exp(gauss_log_eval(x, g))


def gauss_inner(g0: Gaussian, g1: Gaussian) -> float:
    """L2 inner product int g0(x) g1(x) dx = N(m0; m1, P0 + P1)."""
    if g0.dim != g1.dim:
        raise ValueError(f"dimension mismatch: {g0.dim} vs {g1.dim}")
    return float(np.exp(log_gauss(g0.mean - g1.mean, g0.cov + g1.cov)))


def gauss_bhatt_coeff(g0: Gaussian, g1: Gaussian) -> float:
    """Bhattacharyya coefficient int sqrt(g0 g1) dx, in (0, 1].

    Equals exp(-D_B) with the Gaussian Bhattacharyya distance
    D_B = (1/8) dm' Pbar^-1 dm + (1/2) log(|Pbar| / sqrt(|P0| |P1|)),
    Pbar = (P0 + P1)/2.  Coordinate-scale invariant.
    """
    if g0.dim != g1.dim:
        raise ValueError(f"dimension mismatch: {g0.dim} vs {g1.dim}")
    pbar = 0.5 * (g0.cov + g1.cov)
    chol = np.linalg.cholesky(pbar)
    y = _forward_sub(chol, g0.mean - g1.mean)
    maha = float(y @ y)
    logdet_bar = 2.0 * float(np.log(np.diagonal(chol)).sum())
    _, logdet0 = np.linalg.slogdet(g0.cov)
    _, logdet1 = np.linalg.slogdet(g1.cov)
    log_cb = -0.125 * maha - 0.5 * (logdet_bar - 0.5 * (logdet0 + logdet1))
    return float(np.exp(log_cb))


# ---------------------------------------------------------------------------
# mixture operations


def mixture_mass(u: GaussianMixture) -> float:
    """Total weight (the integral of the mixture over the state space)."""
    return float(u.weights.sum())


def _active(u: GaussianMixture):
    """Drop zero-weight components; exact because they contribute zero."""
    keep = u.weights > 0.0
    if np.all(keep):
        return u.weights, u.means, u.covs
    return u.weights[keep], u.means[keep], u.covs[keep]


def pairwise_log_inner(means_a, covs_a, means_b, covs_b) -> np.ndarray:
    """Matrix of log N(m_a_i; m_b_j, P_a_i + P_b_j), shape (na, nb)."""
    na, d = means_a.shape
    nb = means_b.shape[0]
    if na == 0 or nb == 0:
        return np.zeros((na, nb))
    diffs = means_a[:, None, :] - means_b[None, :, :]
    covs = covs_a[:, None, :, :] + covs_b[None, :, :, :]
    return log_gauss(diffs.reshape(-1, d), covs.reshape(-1, d, d)).reshape(na, nb)


def mixture_inner(u: GaussianMixture, v: GaussianMixture) -> float:
    """L2 inner product int u(x) v(x) dx of two mixtures on the same space."""
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} vs {v.dim}")
    wa, ma, ca = _active(u)
    wb, mb, cb = _active(v)
    if wa.size == 0 or wb.size == 0:
        return 0.0
    table = np.exp(pairwise_log_inner(ma, ca, mb, cb))
    return float(wa @ table @ wb)


def mixture_log_eval(u: GaussianMixture, points: np.ndarray) -> np.ndarray:
    """log u(x) for points (m, d); -inf where the mixture is zero."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != u.dim:
        raise ValueError(f"points have dimension {points.shape[1]}, mixture has {u.dim}")
    m = points.shape[0]
    w, means, covs = _active(u)
    n = w.size
    if n == 0 or m == 0:
        return np.full(m, -np.inf)
    logw = np.log(w)
    out = np.empty(m)
    # Chunk so the (chunk, n, d) intermediate stays modest on big grids.
    chunk = max(1, 2_000_000 // n)
    for lo in range(0, m, chunk):
        pts = points[lo : lo + chunk]
        diffs = pts[:, None, :] - means[None, :, :]
        logs = log_gauss(diffs, np.broadcast_to(covs, (pts.shape[0], n, u.dim, u.dim)))
        block = logs + logw
        top = block.max(axis=1)
        out[lo : lo + chunk] = top + np.log(np.exp(block - top[:, None]).sum(axis=1))
    return out


def mixture_eval(u: GaussianMixture, points: np.ndarray) -> np.ndarray:
    """Mixture density u(x) at points (m, d)."""
    return np.exp(mixture_log_eval(u, points))


def mixture_scale(u: GaussianMixture, s: float) -> GaussianMixture:
    """Push the mixture through x -> s x: means scale by s, covs by s^2."""
    s = float(s)
    if not math.isfinite(s) or s <= 0.0:
        raise ValueError(f"scale must be finite and > 0, got {s!r}")
    return GaussianMixture(u.weights, s * u.means, (s * s) * u.covs)


def prune_merge(
    u: GaussianMixture,
    truncation_threshold: float = 1e-5,
    merge_threshold: float = 4.0,
    max_components: int = 100,
) -> GaussianMixture:
    """Standard mixture reduction: truncate, greedily merge, cap.

    Components with weight < truncation_threshold are dropped.  Then,
    repeatedly, the heaviest remaining component absorbs every remaining
    component within squared Mahalanobis distance merge_threshold of its mean
    (measured in each candidate's own covariance); the group is replaced by
    its moment-matched Gaussian.  Finally only the max_components heaviest
    merged components are kept.  Total mass is preserved by merging but not
    by truncation or the cap.
    """
    if max_components < 0:
        raise ValueError("max_components must be >= 0")
    if merge_threshold < 0.0:
        raise ValueError("merge_threshold must be >= 0")
    keep = u.weights >= truncation_threshold
    w = u.weights[keep]
    m = u.means[keep]
    c = u.covs[keep]
    out_w: list[float] = []
    out_m: list[np.ndarray] = []
    out_c: list[np.ndarray] = []
    remaining = np.ones(w.size, dtype=bool)
    while remaining.any():
        idx = np.flatnonzero(remaining)
        j = idx[np.argmax(w[idx])]
        diffs = m[idx] - m[j]
        chol = np.linalg.cholesky(c[idx])
        y = _forward_sub(chol, diffs)
        maha = np.einsum("ij,ij->i", y, y)
        group = idx[maha <= merge_threshold]
        remaining[group] = False
        if group.size == 1:
            out_w.append(float(w[j]))
            out_m.append(m[j])
            out_c.append(c[j])
            continue
        wg = w[group]
        total = float(wg.sum())
        if total <= 0.0:
            # All-zero-weight group: moment matching is undefined, keep the pivot.
            out_w.append(0.0)
            out_m.append(m[j])
            out_c.append(c[j])
            continue
        mean = (wg[:, None] * m[group]).sum(axis=0) / total
        dev = m[group] - mean
        cov = (
            wg[:, None, None] * (c[group] + dev[:, :, None] * dev[:, None, :])
        ).sum(axis=0) / total
        out_w.append(total)
        out_m.append(mean)
        out_c.append(cov)
    if not out_w:
        return GaussianMixture.empty(u.dim)
    ww = np.array(out_w)
    mm = np.stack(out_m)
    cc = np.stack(out_c)
    if ww.size > max_components:
        order = np.argsort(-ww, kind="stable")[:max_components]
        order = np.sort(order)
        ww, mm, cc = ww[order], mm[order], cc[order]
    return GaussianMixture(ww, mm, cc)


# ---------------------------------------------------------------------------
# serialization


def mixture_to_dict(u: GaussianMixture) -> dict:
    return {
        "dim": u.dim,
        "components": [
            {"weight": float(w), "mean": m.tolist(), "cov": c.tolist()}
            for w, m, c in zip(u.weights, u.means, u.covs)
        ],
    }


def mixture_from_dict(data: dict) -> GaussianMixture:
    if not isinstance(data, dict):
        raise ValueError("mixture document must be a JSON object")
    try:
        dim = int(data["dim"])
        comps = data["components"]
    except KeyError as exc:
        raise ValueError(f"mixture document missing key {exc.args[0]!r}") from None
    if dim <= 0:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if not isinstance(comps, list):
        raise ValueError("components must be a list")
    if not comps:
        return GaussianMixture.empty(dim)
    weights, means, covs = [], [], []
    for i, comp in enumerate(comps):
        try:
            weights.append(float(comp["weight"]))
            mean = np.asarray(comp["mean"], dtype=float)
            cov = np.asarray(comp["cov"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"components[{i}] is malformed: {exc}") from None
        if mean.shape != (dim,):
            raise ValueError(f"components[{i}].mean must have shape ({dim},), got {mean.shape}")
        if cov.shape != (dim, dim):
            raise ValueError(f"components[{i}].cov must have shape ({dim}, {dim}), got {cov.shape}")
        means.append(mean)
        covs.append(cov)
    return GaussianMixture(weights, np.stack(means), np.stack(covs))


def load_mixture(path) -> GaussianMixture:
    with open(path, "r", encoding="utf-8") as fh:
        return mixture_from_dict(json.load(fh))


def save_mixture(u: GaussianMixture, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mixture_to_dict(u), fh, indent=2)
        fh.write("\n")
