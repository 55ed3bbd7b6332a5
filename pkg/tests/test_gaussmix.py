"""Gaussian and Gaussian-mixture algebra against quadrature and closed forms."""

import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from ppdiv import (
    Gaussian,
    GaussianMixture,
    gauss_bhatt_coeff,
    gauss_eval,
    gauss_inner,
    mixture_inner,
    mixture_mass,
    mixture_scale,
    prune_merge,
)
from ppdiv.pointprocess import RngStream, sample_poisson_counts
from ppdiv.validate import random_mixture


def scipy_density(mixture, points):
    # Reference mixture density via scipy, independent of the package's code.
    out = np.zeros(len(points))
    for w, mean, cov in zip(mixture.weights, mixture.means, mixture.covs):
        out += w * multivariate_normal.pdf(points, mean=mean, cov=cov)
    return out


def trapz_product(g0, g1, lo, hi, step, transform=None):
    # 1-D trapezoid integral of N0(x) * N1(x) (or a transform of the product).
    x = np.arange(lo, hi + step, step)[:, None]
    vals = multivariate_normal.pdf(x, mean=g0.mean, cov=g0.cov) * multivariate_normal.pdf(
        x, mean=g1.mean, cov=g1.cov
    )
    if transform is not None:
        vals = transform(vals)
    return float(np.trapezoid(vals, x[:, 0]))


def grid_product_2d(u, v, pad=8.0, cells=400):
    # Midpoint-rule integral of u(x) * v(x) over a box covering both mixtures.
    sig_u = np.sqrt(np.diagonal(u.covs, axis1=-2, axis2=-1))
    sig_v = np.sqrt(np.diagonal(v.covs, axis1=-2, axis2=-1))
    lo = np.minimum((u.means - pad * sig_u).min(0), (v.means - pad * sig_v).min(0))
    hi = np.maximum((u.means + pad * sig_u).max(0), (v.means + pad * sig_v).max(0))
    edges = [np.linspace(lo[i], hi[i], cells + 1) for i in range(2)]
    centers = [0.5 * (e[1:] + e[:-1]) for e in edges]
    xx, yy = np.meshgrid(*centers, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    cell = (edges[0][1] - edges[0][0]) * (edges[1][1] - edges[1][0])
    return float(np.sum(scipy_density(u, pts) * scipy_density(v, pts)) * cell)


def test_gauss_eval_standard_normal_values():
    g = Gaussian(np.zeros(1), np.eye(1))
    assert gauss_eval(np.zeros(1), g) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=1e-12)
    assert gauss_eval(np.zeros(1), g) == pytest.approx(0.3989423, abs=1e-7)
    assert gauss_eval(np.ones(1), g) == pytest.approx(0.2419707, abs=1e-7)
    g2 = Gaussian(np.zeros(2), np.eye(2))
    assert gauss_eval(np.zeros(2), g2) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-12)
    assert gauss_eval(np.zeros(2), g2) == pytest.approx(0.1591549, abs=1e-7)


def test_gauss_eval_rejects_bad_inputs():
    g = Gaussian(np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        gauss_eval(np.zeros(3), g)
    with pytest.raises(ValueError):
        Gaussian(np.zeros(2), -np.eye(2))
    with pytest.raises(ValueError):
        Gaussian(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_gauss_inner_same_and_separated():
    g0 = Gaussian(np.zeros(1), np.eye(1))
    g3 = Gaussian(np.full(1, 3.0), np.eye(1))
    same = gauss_inner(g0, g0)
    assert same == pytest.approx(1.0 / (2.0 * math.sqrt(math.pi)), rel=1e-12)
    assert same == pytest.approx(0.2820948, abs=1e-7)
    # Independent oracle: trapezoid quadrature of the product density.
    cross = gauss_inner(g0, g3)
    oracle = trapz_product(g0, g3, -10.0, 13.0, 1e-3)
    assert cross == pytest.approx(oracle, rel=1e-6)
    assert cross == pytest.approx(0.0297325, abs=1e-7)
    assert gauss_inner(g3, g0) == cross


def test_gauss_inner_symmetry_and_cauchy_schwarz():
    rng = np.random.default_rng(7)
    for _ in range(50):
        d = int(rng.integers(1, 4))
        mk = lambda: Gaussian(
            rng.normal(size=d),
            (lambda a: a @ a.T + 0.3 * np.eye(d))(0.5 * rng.normal(size=(d, d))),
        )
        a, b = mk(), mk()
        assert gauss_inner(a, b) == gauss_inner(b, a)
        lhs = gauss_inner(a, b) ** 2
        rhs = gauss_inner(a, a) * gauss_inner(b, b)
        assert lhs <= rhs + 1e-12


def test_mixture_inner_single_term_and_bilinearity():
    g = Gaussian(np.zeros(1), np.eye(1))
    u = GaussianMixture([1.0], [g.mean], [g.cov])
    assert mixture_inner(u, u) == pytest.approx(0.2820948, abs=1e-7)
    v = GaussianMixture([2.0], [g.mean], [g.cov])
    assert mixture_inner(v, u) == pytest.approx(0.5641896, abs=1e-7)
    rng = RngStream(11)
    for i in range(20):
        a = random_mixture(rng.child(2 * i), 2, 3, 1.5)
        b = random_mixture(rng.child(2 * i + 1), 2, 2, 2.0)
        c = 0.1 + 5.0 * rng.child(1000 + i).generator.random()
        scaled = GaussianMixture(c * a.weights, a.means, a.covs)
        assert mixture_inner(scaled, b) == pytest.approx(
            c * mixture_inner(a, b), rel=1e-12
        )


def test_mixture_inner_matches_2d_quadrature():
    rng = RngStream(23)
    for i in range(3):
        u = random_mixture(rng.child(2 * i), 2, 3, 1.2)
        v = random_mixture(rng.child(2 * i + 1), 2, 2, 0.8)
        oracle = grid_product_2d(u, v)
        assert mixture_inner(u, v) == pytest.approx(oracle, rel=1e-6)


def test_mixture_inner_dimension_mismatch():
    u = GaussianMixture([1.0], np.zeros((1, 1)), np.eye(1)[None])
    v = GaussianMixture([1.0], np.zeros((1, 2)), np.eye(2)[None])
    with pytest.raises(ValueError):
        mixture_inner(u, v)


def test_mixture_mass_counts_and_sampling():
    assert mixture_mass(GaussianMixture.empty(3)) == 0.0
    u = GaussianMixture([1.0, 2.0], np.zeros((2, 1)), np.tile(np.eye(1), (2, 1, 1)))
    assert mixture_mass(u) == 3.0
    # Cardinality of sampled processes is Poisson(mass).
    n = 100_000
    counts = sample_poisson_counts(RngStream(5), 3.0, n)
    se = math.sqrt(3.0 / n)
    assert abs(counts.mean() - 3.0) < 3.0 * se


def test_bhatt_coeff_values():
    g0 = Gaussian(np.zeros(1), np.eye(1))
    g3 = Gaussian(np.full(1, 3.0), np.eye(1))
    assert gauss_bhatt_coeff(g0, g0) == pytest.approx(1.0, abs=1e-12)
    coeff = gauss_bhatt_coeff(g0, g3)
    oracle = trapz_product(g0, g3, -10.0, 13.0, 1e-3, transform=np.sqrt)
    assert coeff == pytest.approx(oracle, rel=1e-6)
    assert coeff == pytest.approx(0.3246525, abs=1e-7)
    gw = Gaussian(np.zeros(1), 4.0 * np.eye(1))
    wide = gauss_bhatt_coeff(g0, gw)
    oracle_wide = trapz_product(g0, gw, -30.0, 30.0, 1e-3, transform=np.sqrt)
    assert abs(wide - oracle_wide) < 1e-8
    assert 0.0 < wide <= 1.0


def test_mixture_scale_identity_and_affine():
    rng = RngStream(31)
    u = random_mixture(rng, 2, 3, 2.5)
    same = mixture_scale(u, 1.0)
    assert np.array_equal(same.weights, u.weights)
    assert np.array_equal(same.means, u.means)
    assert np.array_equal(same.covs, u.covs)
    one = GaussianMixture([1.0], [[1.0]], [np.eye(1)])
    doubled = mixture_scale(one, 2.0)
    assert doubled.means[0, 0] == pytest.approx(2.0)
    assert doubled.covs[0, 0, 0] == pytest.approx(4.0)
    for i in range(10):
        v = random_mixture(rng.child(i), 3, 4, 1.7)
        s = 0.1 + 3.0 * rng.child(100 + i).generator.random()
        assert mixture_mass(mixture_scale(v, s)) == pytest.approx(
            mixture_mass(v), rel=1e-12
        )
    with pytest.raises(ValueError):
        mixture_scale(u, 0.0)


def test_prune_merge_basics():
    single = GaussianMixture([0.8], np.zeros((1, 2)), np.eye(2)[None])
    kept = prune_merge(single, 1e-5, 4.0, 100)
    assert len(kept) == 1
    assert np.allclose(kept.means, single.means)

    twin = GaussianMixture(
        [0.5, 0.5], np.zeros((2, 2)), np.tile(np.eye(2), (2, 1, 1))
    )
    merged = prune_merge(twin, 1e-5, 4.0, 100)
    assert len(merged) == 1
    assert merged.weights[0] == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(merged.means[0], np.zeros(2), atol=1e-12)
    assert np.allclose(merged.covs[0], np.eye(2), atol=1e-12)


def test_prune_merge_caps_and_preserves_mass():
    rng = RngStream(43)
    u = random_mixture(rng, 2, 200, 10.0)
    out = prune_merge(u, 1e-5, 4.0, 100)
    assert len(out) <= 100
    assert mixture_mass(out) <= mixture_mass(u) + 1e-9
    # Zero thresholds and a generous cap leave the mixture untouched.
    out2 = prune_merge(u, 0.0, 0.0, 500)
    assert len(out2) == len(u)
    assert mixture_mass(out2) == pytest.approx(mixture_mass(u), rel=1e-12)


def test_zero_weight_components_contribute_nothing():
    base = GaussianMixture([1.0], np.zeros((1, 1)), np.eye(1)[None])
    padded = GaussianMixture(
        [1.0, 0.0], np.array([[0.0], [50.0]]), np.tile(np.eye(1), (2, 1, 1))
    )
    assert mixture_inner(padded, padded) == mixture_inner(base, base)
    assert mixture_mass(padded) == 1.0
