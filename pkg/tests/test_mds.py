import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerlearn.errors import DataError
from finslerlearn.geometry import RandersSpace
from finslerlearn.init import Embedding, isomap_embed
from finslerlearn.mds import (
    MdsGdConfig,
    StressProblem,
    cosine_lr,
    finsler_c_matrix,
    finsler_smacof_step,
    finsler_stress,
    finsler_stress_grad,
    run_finsler_mds_gd,
    run_smacof,
    smacof_step,
    stress,
)

from oracles import central_diff, randers, rel_err, stress_loop


def cdist(x):
    return np.linalg.norm(x[:, None] - x[None], axis=2)


def random_space(rng, m, mag):
    if mag == 0:
        return RandersSpace.euclidean(m)
    omega = rng.normal(size=m)
    return RandersSpace(m, omega * mag / np.linalg.norm(omega))


def random_problem(rng, n, m, mag, symmetric=False, weights=False):
    d = rng.uniform(0.5, 3.0, (n, n))
    if symmetric:
        d = (d + d.T) / 2
    np.fill_diagonal(d, 0)
    w = rng.uniform(0.2, 1.0, (n, n)) if weights else np.ones((n, n))
    if weights and symmetric:
        w = (w + w.T) / 2
    np.fill_diagonal(w, 0)
    return StressProblem(d, w, random_space(rng, m, mag))


def literal_finsler_smacof(y, problem):
    """vec(Y') = K^+ vec(B Y - C) with K = (I + w w^T) kron V built densely."""
    n, m = y.shape
    w, d, omega = problem.W, problem.D, problem.space.omega
    v = np.zeros((n, n))
    b = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                v[i, j] = -w[i, j]
                b[i, j] = -w[i, j] * d[i, j] / randers(y[i], y[j], omega)
        v[i, i] = -v[i].sum()
        b[i, i] = -b[i].sum()
    k = np.kron(np.eye(m) + np.outer(omega, omega), v)
    c = ((w * d - w.T * d.T) @ np.ones(n))[:, None] * omega[None, :]
    rhs = (b @ y - c).reshape(-1, order="F")
    return (np.linalg.pinv(k) @ rhs).reshape((n, m), order="F")


class TestStress:
    def test_perfect_fit(self, rng):
        y = rng.normal(size=(6, 2))
        problem = StressProblem.unit_weights(cdist(y), RandersSpace.euclidean(2))
        assert stress(y, problem) == pytest.approx(0.0, abs=1e-20)

    def test_reduction(self, rng):
        p = random_problem(rng, 8, 3, 0.0)
        y = rng.normal(size=(8, 3))
        assert finsler_stress(y, p) == stress(y, p)

    @pytest.mark.parametrize("mag", [0.0, 0.3, 0.9])
    def test_double_loop(self, rng, mag):
        p = random_problem(rng, 9, 3, mag, weights=True)
        y = rng.normal(size=(9, 3))
        expected = stress_loop(y, p.D, p.W, p.space.omega)
        assert finsler_stress(y, p) == pytest.approx(expected, rel=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.sampled_from([0.0, 0.3, 0.9]))
    def test_gradient_finite_differences(self, seed, m, mag):
        rng = np.random.default_rng(seed)
        p = random_problem(rng, 10, m, mag, weights=True)
        y = rng.normal(size=(10, m))
        g = finsler_stress_grad(y, p)
        fd = central_diff(lambda v: stress_loop(v.reshape(y.shape), p.D, p.W, p.space.omega), y)
        assert rel_err(g, fd) <= 1e-5
        np.testing.assert_allclose(g.sum(axis=0), 0, atol=1e-10)

    def test_invalid_problem(self):
        with pytest.raises(DataError):
            StressProblem(np.zeros((2, 3)), np.zeros((2, 3)), RandersSpace.euclidean(2))
        with pytest.raises(DataError):
            StressProblem(np.zeros((2, 2)), -np.ones((2, 2)), RandersSpace.euclidean(2))


class TestSmacof:
    def test_two_points(self):
        d = np.array([[0, 2.0], [2.0, 0]])
        p = StressProblem.unit_weights(d, RandersSpace.euclidean(1))
        y = smacof_step(np.array([[0.0], [1.0]]), p)
        assert abs(y[1, 0] - y[0, 0]) == 2.0

    def test_fixed_point(self, rng):
        y = rng.normal(size=(7, 2))
        y -= y.mean(axis=0)
        p = StressProblem.unit_weights(cdist(y), RandersSpace.euclidean(2))
        np.testing.assert_allclose(smacof_step(y, p), y, atol=1e-10)

    @pytest.mark.parametrize("weights", [False, True])
    def test_monotone(self, rng, weights):
        p = random_problem(rng, 10, 2, 0.0, symmetric=True, weights=weights)
        y = rng.normal(size=(10, 2))
        prev = stress(y, p)
        for _ in range(50):
            y = smacof_step(y, p)
            cur = stress(y, p)
            assert cur <= prev + 1e-10
            prev = cur

    def test_requires_symmetry(self, rng):
        p = random_problem(rng, 5, 2, 0.0)
        with pytest.raises(DataError):
            smacof_step(rng.normal(size=(5, 2)), p)

    def test_zero_weights(self):
        p = StressProblem(np.ones((3, 3)) - np.eye(3), np.zeros((3, 3)), RandersSpace.euclidean(2))
        with pytest.raises(DataError):
            smacof_step(np.eye(3)[:, :2], p)


class TestFinslerSmacof:
    def test_reduction(self, rng):
        p = random_problem(rng, 8, 2, 0.0, symmetric=True)
        y = rng.normal(size=(8, 2))
        np.testing.assert_allclose(finsler_smacof_step(y, p), smacof_step(y, p), atol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_literal_kronecker(self, seed):
        rng = np.random.default_rng(seed)
        p = random_problem(rng, 3, 3, 0.6, weights=bool(seed % 2))
        y = rng.normal(size=(3, 3))
        np.testing.assert_allclose(finsler_smacof_step(y, p), literal_finsler_smacof(y, p),
                                   atol=1e-10)

    def test_symmetric_d_has_zero_c(self, rng):
        p = random_problem(rng, 6, 2, 0.5, symmetric=True)
        assert np.all(finsler_c_matrix(p) == 0)

    def test_literal_fixed_point_not_stationary(self, rng):
        # the displayed update is not a majorization of the Finsler stress:
        # iterating it from a near-fit start moves away from the minimum
        p, x = self.noisy_problem(rng)
        emb, trace = run_smacof(p, Embedding(x, p.space), steps=500, tol=0, finsler=True)
        assert trace[-1] > trace[0]
        assert np.abs(finsler_stress_grad(emb.coords, p)).max() > 1e-3

    @pytest.mark.parametrize("seed", range(4))
    def test_majorizing_variant(self, seed):
        rng = np.random.default_rng(seed)
        p, x = self.noisy_problem(rng)
        y0 = x + rng.normal(size=x.shape) * 0.5
        emb, trace = run_smacof(p, Embedding(y0, p.space), steps=3000, tol=0, finsler=True,
                                majorize=True)
        assert np.all(np.diff(trace) <= 1e-10)
        assert np.abs(finsler_stress_grad(emb.coords, p)).max() < 1e-6

    def test_majorizing_reduces(self, rng):
        p = random_problem(rng, 8, 2, 0.0, symmetric=True)
        y = rng.normal(size=(8, 2))
        np.testing.assert_allclose(finsler_smacof_step(y, p, majorize=True), smacof_step(y, p),
                                   atol=1e-14)

    @staticmethod
    def noisy_problem(rng):
        x = rng.normal(size=(8, 3))
        space = RandersSpace(3, [0.0, 0.3, 0.4])
        d_f = cdist(x) + (x[None] - x[:, None]) @ space.omega
        noise = rng.uniform(0, 0.3, (8, 8)) * (1 - np.eye(8))
        return StressProblem.unit_weights(d_f + noise, space), x

    def test_size_guard(self, rng):
        p = random_problem(rng, 10, 2, 0.3)
        with pytest.raises(DataError):
            finsler_smacof_step(rng.normal(size=(10, 2)), p, max_size=19)


class TestGd:
    def test_cosine(self):
        assert cosine_lr(0.1, 0, 100) == 0.1
        assert cosine_lr(0.1, 50, 100) == pytest.approx(0.05)
        assert cosine_lr(0.1, 100, 100) == pytest.approx(0.0)

    def test_planar_from_isomap(self):
        x = np.array([[0, 0], [3, 0], [0, 4], [2, 5]], dtype=float)
        p = StressProblem.unit_weights(cdist(x), RandersSpace.euclidean(2))
        init = isomap_embed(cdist(x), 2)
        emb, trace = run_finsler_mds_gd(p, init, MdsGdConfig(learning_rate=0.01))
        assert trace[-1] < 1e-4
        assert len(trace) == 101

    def test_decreases_and_reproducible(self, rng):
        p = random_problem(rng, 12, 3, 0.5)
        init = Embedding(rng.normal(size=(12, 3)), p.space)
        a, ta = run_finsler_mds_gd(p, init)
        b, tb = run_finsler_mds_gd(p, init)
        assert np.array_equal(ta, tb) and np.array_equal(a.coords, b.coords)
        assert ta[-1] < ta[0]

    def test_dimension_mismatch(self, rng):
        p = random_problem(rng, 5, 3, 0.5)
        with pytest.raises(ValueError):
            run_finsler_mds_gd(p, Embedding.euclidean(np.zeros((5, 2))))
