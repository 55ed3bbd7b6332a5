"""Information divergences between Poisson point processes.

A Poisson point process with integrable intensity u has, with respect to a
dimensionless Poisson reference measure, the density
f(X) = exp(-<u,1>) prod_{x in X} (k u(x)) where k is the numeric hyper-volume
of the unit cell (see HyperVolumeUnit).  Two consequences drive everything
here:

* the L2 inner product of two such densities is
  <f, g> = exp(k <u, v> - <u,1> - <v,1>), so
* the Cauchy-Schwarz divergence D_CS(f, g) = -log <f,g>/sqrt(<f,f><g,g>)
  collapses to (k/2) ||u - v||^2, a Gaussian double sum when the intensities
  are Gaussian mixtures.

The Bhattacharyya distance between two Poisson processes equals the squared
Hellinger distance between their intensity measures and has a closed form for
single-Gaussian intensities; it does not depend on k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .gaussmix import (
    Gaussian,
    GaussianMixture,
    HyperVolumeUnit,
    gauss_bhatt_coeff,
    mixture_inner,
    mixture_mass,
)

_CLAMP_TOL = 1e-10


def _clamp_roundoff(x: float) -> float:
    """Analytically nonnegative results: zero out sub-tolerance negatives."""
    if -_CLAMP_TOL < x < 0.0:
        return 0.0
    return x


@dataclass(frozen=True)
class PoissonModel:
    """Poisson point process with Gaussian-mixture intensity.

    ``unit`` fixes the numeric hyper-volume k entering reference-measure
    dependent quantities; masses and cardinality statistics do not depend
    on it.
    """

    intensity: GaussianMixture
    unit: HyperVolumeUnit = field(default_factory=HyperVolumeUnit)

    def __post_init__(self):
        if not isinstance(self.intensity, GaussianMixture):
            raise ValueError("intensity must be a GaussianMixture")
        if not isinstance(self.unit, HyperVolumeUnit):
            raise ValueError("unit must be a HyperVolumeUnit")

    @property
    def dim(self) -> int:
        return self.intensity.dim

    @property
    def mass(self) -> float:
        return mixture_mass(self.intensity)


@dataclass(frozen=True)
class MixturePoissonModel:
    """Finite mixture of Poisson processes sharing dimension and unit.

    components: tuple of (mixture_weight, PoissonModel); the weights are
    probabilities (each in [0, 1], summing to 1 within 1e-9).
    """

    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), model) for w, model in self.components)
        if not comps:
            raise ValueError("mixture of processes needs at least one component")
        total = 0.0
        for i, (w, model) in enumerate(comps):
            if not isinstance(model, PoissonModel):
                raise ValueError(f"components[{i}] is not a PoissonModel")
            if not (0.0 <= w <= 1.0):
                raise ValueError(f"components[{i}] weight {w!r} outside [0, 1]")
            total += w
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {total!r}, expected 1")
        dim = comps[0][1].dim
        unit = comps[0][1].unit
        for i, (_, model) in enumerate(comps):
            if model.dim != dim:
                raise ValueError(f"components[{i}] dimension {model.dim} != {dim}")
            if model.unit != unit:
                raise ValueError(f"components[{i}] unit {model.unit} != {unit}")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0][1].dim

    @property
    def unit(self) -> HyperVolumeUnit:
        return self.components[0][1].unit


def _check_pair(a: PoissonModel, b: PoissonModel) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.unit != b.unit:
        raise ValueError(f"unit mismatch: {a.unit} vs {b.unit}")


def csd_terms(k: float, uu: float, vv: float, uv: float) -> float:
    """Assemble D_CS from precomputed intensity inner products.

    Split out so callers that reuse <u,u> across many candidate v (the
    controller does) produce bit-identical values to csd_poisson_gm.
    """
    return _clamp_roundoff(k * (0.5 * uu + 0.5 * vv - uv))


def csd_poisson_gm(a: PoissonModel, b: PoissonModel) -> float:
    """Cauchy-Schwarz divergence (k/2) ||u - v||^2, closed form.

    Symmetric, zero iff the intensities coincide, linear in the unit
    hyper-volume k.
    """
    _check_pair(a, b)
    u, v = a.intensity, b.intensity
    return csd_terms(
        a.unit.k,
        mixture_inner(u, u),
        mixture_inner(v, v),
        mixture_inner(u, v),
    )


def csd_poisson_quadrature(
    u_values: np.ndarray,
    v_values: np.ndarray,
    cell_volume: float,
    unit: HyperVolumeUnit = HyperVolumeUnit(),
) -> float:
    """D_CS from intensity samples on a common grid: (k/2) sum (u-v)^2 vol.

    ``u_values``/``v_values`` are the two intensities evaluated at the same
    cell centers (see intensity_grid); accuracy is the midpoint rule's.
    """
    u_values = np.asarray(u_values, dtype=float).reshape(-1)
    v_values = np.asarray(v_values, dtype=float).reshape(-1)
    if u_values.shape != v_values.shape:
        raise ValueError(f"sample shape mismatch: {u_values.shape} vs {v_values.shape}")
    cell_volume = float(cell_volume)
    if not math.isfinite(cell_volume) or cell_volume <= 0.0:
        raise ValueError(f"cell_volume must be finite and > 0, got {cell_volume!r}")
    diff = u_values - v_values
    return 0.5 * unit.k * float(diff @ diff) * cell_volume


def csd_poisson_mixture(fa: MixturePoissonModel, fb: MixturePoissonModel) -> float:
    """D_CS between finite mixtures of Poisson processes, closed form.

    Each pairwise process inner product is
    exp(k <u_i, v_j> - mass(u_i) - mass(v_j)); the three log-sums are
    combined in log space.  With one component of weight 1 on each side this
    reduces exactly to csd_poisson_gm.
    """
    if fa.dim != fb.dim:
        raise ValueError(f"dimension mismatch: {fa.dim} vs {fb.dim}")
    if fa.unit != fb.unit:
        raise ValueError(f"unit mismatch: {fa.unit} vs {fb.unit}")
    k = fa.unit.k

    def log_gram(left: MixturePoissonModel, right: MixturePoissonModel) -> float:
        lw = np.array([w for w, _ in left.components])
        rw = np.array([w for w, _ in right.components])
        exps = np.empty((lw.size, rw.size))
        for i, (_, mi) in enumerate(left.components):
            for j, (_, mj) in enumerate(right.components):
                exps[i, j] = (
                    k * mixture_inner(mi.intensity, mj.intensity) - mi.mass - mj.mass
                )
        return float(logsumexp(exps.reshape(-1), b=np.outer(lw, rw).reshape(-1)))

    log_ab = log_gram(fa, fb)
    log_aa = log_gram(fa, fa)
    log_bb = log_gram(fb, fb)
    return _clamp_roundoff(-log_ab + 0.5 * log_aa + 0.5 * log_bb)


def bhatt_poisson_gaussian(a: PoissonModel, b: PoissonModel) -> float:
    """Bhattacharyya distance between Poisson processes with single-Gaussian
    intensities u = w_u N0, v = w_v N1:

        D_B = (w_u + w_v)/2 - sqrt(w_u w_v) * int sqrt(N0 N1) dx.

    Equals the squared Hellinger distance between the intensity measures;
    independent of the unit hyper-volume.
    """
    _check_pair(a, b)
    for name, model in (("a", a), ("b", b)):
        if len(model.intensity) != 1:
            raise ValueError(
                f"{name} must have a single-component intensity, got {len(model.intensity)}"
            )
    wu = float(a.intensity.weights[0])
    wv = float(b.intensity.weights[0])
    g0 = Gaussian(a.intensity.means[0], a.intensity.covs[0])
    g1 = Gaussian(b.intensity.means[0], b.intensity.covs[0])
    coeff = gauss_bhatt_coeff(g0, g1)
    return _clamp_roundoff(0.5 * (wu + wv) - math.sqrt(wu * wv) * coeff)


def hellinger_sq_quadrature(
    u_values: np.ndarray, v_values: np.ndarray, cell_volume: float
) -> float:
    """Squared Hellinger distance between intensity measures from grid samples:
    (1/2) sum (sqrt(u) - sqrt(v))^2 vol."""
    u_values = np.asarray(u_values, dtype=float).reshape(-1)
    v_values = np.asarray(v_values, dtype=float).reshape(-1)
    if u_values.shape != v_values.shape:
        raise ValueError(f"sample shape mismatch: {u_values.shape} vs {v_values.shape}")
    if np.any(u_values < 0.0) or np.any(v_values < 0.0):
        raise ValueError("intensity samples must be nonnegative")
    cell_volume = float(cell_volume)
    if not math.isfinite(cell_volume) or cell_volume <= 0.0:
        raise ValueError(f"cell_volume must be finite and > 0, got {cell_volume!r}")
    diff = np.sqrt(u_values) - np.sqrt(v_values)
    return 0.5 * float(diff @ diff) * cell_volume


_DEFAULT_CELLS = {1: 2000, 2: 500}


def intensity_grid(
    mixtures, cells_per_axis: int | None = None, pad_sigmas: float = 8.0
):
    """Cell-center grid covering every component of ``mixtures`` plus padding.

    Returns (points, cell_volume) where points has shape (n_cells, d).  The
    box is the union of per-component mean +- pad_sigmas * sqrt(diag cov)
    ranges.  Supports d = 1 and d = 2 (cell counts grow as cells^d).
    """
    mixtures = list(mixtures)
    if not mixtures:
        raise ValueError("need at least one mixture to build a grid")
    dim = mixtures[0].dim
    for u in mixtures:
        if u.dim != dim:
            raise ValueError("mixtures have inconsistent dimensions")
    if dim not in _DEFAULT_CELLS:
        raise ValueError(f"quadrature grids support dim 1 and 2, got {dim}")
    if cells_per_axis is None:
        cells_per_axis = _DEFAULT_CELLS[dim]
    if cells_per_axis < 2:
        raise ValueError("cells_per_axis must be >= 2")
    lo = np.full(dim, np.inf)
    hi = np.full(dim, -np.inf)
    any_component = False
    for u in mixtures:
        if len(u) == 0:
            continue
        any_component = True
        sig = np.sqrt(np.diagonal(u.covs, axis1=-2, axis2=-1))
        lo = np.minimum(lo, (u.means - pad_sigmas * sig).min(axis=0))
        hi = np.maximum(hi, (u.means + pad_sigmas * sig).max(axis=0))
    if not any_component:
        raise ValueError("all mixtures are empty; grid extent is undefined")
    axes = []
    widths = []
    for a in range(dim):
        h = (hi[a] - lo[a]) / cells_per_axis
        axes.append(lo[a] + h * (np.arange(cells_per_axis) + 0.5))
        widths.append(h)
    if dim == 1:
        points = axes[0][:, None]
    else:
        grids = np.meshgrid(*axes, indexing="ij")
        points = np.stack([g.reshape(-1) for g in grids], axis=1)
    return points, float(np.prod(widths))
