"""Operator estimation tests.

Oracles: numpy lstsq (minimum-norm least squares), an explicit
normal-equations inverse for the ridge path, direct power iteration for
predictions, and hand-built spectra for rank rules and eigenvalue
ordering.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdmd import (ConfigError, IllConditionedWarning, InsufficientDataError,
                  RankError, RankRule, ShapeError, SnapshotPair,
                  build_snapshots, dmd_full, dmd_reduced,
                  objective_decomposition_check, predict_full, predict_reduced,
                  rank_truncated_operator, recover_regularized, ridge_dmd)


def random_pair(seed, n=3, t=20, a=None):
    rng = np.random.Generator(np.random.PCG64(seed))
    if a is None:
        a = rng.normal(size=(n, n))
    x = rng.normal(size=(n, t))
    return SnapshotPair(Phi=x, PhiPrime=a @ x), a


class TestSnapshots:
    @given(st.integers(0, 500), st.integers(1, 5), st.integers(2, 30))
    @settings(max_examples=60, deadline=None)
    def test_build_snapshots_overlap(self, seed, n, length):
        rng = np.random.Generator(np.random.PCG64(seed))
        traj = rng.normal(size=(n, length))
        pair = build_snapshots(traj)
        assert pair.Phi.shape == (n, length - 1)
        assert np.array_equal(pair.Phi, traj[:, :-1])
        assert np.array_equal(pair.PhiPrime, traj[:, 1:])
        if length > 2:
            assert np.array_equal(pair.Phi[:, 1:], pair.PhiPrime[:, :-1])

    def test_rejections(self):
        with pytest.raises(InsufficientDataError):
            build_snapshots(np.zeros((2, 1)))
        with pytest.raises(ShapeError):
            SnapshotPair(Phi=np.zeros((2, 3)), PhiPrime=np.zeros((2, 4)))
        with pytest.raises(ConfigError):
            SnapshotPair(Phi=np.full((2, 2), np.nan), PhiPrime=np.zeros((2, 2)))


class TestFullDMD:
    def test_exact_recovery(self):
        pair, a = random_pair(0)
        assert np.allclose(dmd_full(pair).K, a, atol=1e-10)

    @given(st.integers(0, 300))
    @settings(max_examples=40, deadline=None)
    def test_matches_minimum_norm_lstsq(self, seed):
        # rank-deficient Phi: 4 observables but only 2 independent rows;
        # the truncated-SVD operator must agree with numpy's
        # minimum-norm least squares solution
        rng = np.random.Generator(np.random.PCG64(seed))
        basis = rng.normal(size=(2, 15))
        mix = rng.normal(size=(4, 2))
        phi = mix @ basis
        phip = rng.normal(size=(4, 4)) @ phi
        pair = SnapshotPair(Phi=phi, PhiPrime=phip)
        k_lstsq = np.linalg.lstsq(phi.T, phip.T, rcond=None)[0].T
        assert np.allclose(dmd_full(pair).K, k_lstsq, atol=1e-8)

    def test_tolerance_truncates(self):
        # second direction is 1e-6 of the first; a cutoff above that
        # ratio must drop it, matching a rank-one fit
        u = np.array([[1.0, 0.0], [0.0, 1.0]])
        phi = u @ np.diag([1.0, 1e-6]) @ np.linalg.qr(
            np.random.Generator(np.random.PCG64(1)).normal(size=(8, 8)))[0][:2]
        phip = np.vstack([phi[0], -phi[1]])
        pair = SnapshotPair(Phi=phi, PhiPrime=phip)
        loose = dmd_full(pair, tol=1e-3).K
        sharp = dmd_full(pair, tol=1e-9).K
        assert not np.allclose(loose, sharp)
        assert np.linalg.matrix_rank(loose, tol=1e-8) == 1

    def test_default_tolerance_recorded(self):
        pair, _ = random_pair(2)
        model = dmd_full(pair)
        assert model.pinv_tolerance == pytest.approx(
            max(pair.Phi.shape) * np.finfo(float).eps)

    def test_bad_tolerance(self):
        pair, _ = random_pair(3)
        with pytest.raises(ConfigError):
            dmd_full(pair, tol=1.5)
        with pytest.raises(ConfigError):
            dmd_full(pair, tol=-0.1)


class TestRankRule:
    def test_fixed(self):
        assert RankRule(kind="fixed", r=2).resolve([5.0, 1.0, 0.5]) == 2
        with pytest.raises(RankError):
            RankRule(kind="fixed", r=3).resolve([5.0, 1.0, 0.0])

    def test_energy_oracle(self):
        # squared spectrum (4, 1, 0): fractions 0.8, 1.0
        sigma = [2.0, 1.0, 1e-12]
        assert RankRule(kind="energy", tau=0.79).resolve(sigma) == 1
        assert RankRule(kind="energy", tau=0.81).resolve(sigma) == 2
        assert RankRule(kind="energy", tau=0.9999).resolve(sigma) == 2

    def test_tolerance_oracle(self):
        sigma = [2.0, 1.0, 1e-6]
        assert RankRule(kind="tolerance", cutoff=1e-3).resolve(sigma) == 2
        assert RankRule(kind="tolerance", cutoff=1e-8).resolve(sigma) == 3

    def test_default_rule(self):
        rule = RankRule()
        assert rule.kind == "energy" and rule.tau == 0.9999

    def test_validation(self):
        with pytest.raises(ConfigError):
            RankRule(kind="fixed")
        with pytest.raises(ConfigError):
            RankRule(kind="energy", tau=0.0)
        with pytest.raises(ConfigError):
            RankRule(kind="tolerance", cutoff=2.0)
        with pytest.raises(RankError):
            RankRule(kind="fixed", r=1).resolve([0.0, 0.0])


class TestReducedDMD:
    def test_eigenvalues_of_exact_linear_map(self):
        a = np.array([[0.9, 0.1], [0.0, 0.8]])
        pair, _ = random_pair(5, n=2, t=12, a=a)
        model = dmd_reduced(pair, RankRule(kind="fixed", r=2))
        assert np.allclose(np.sort(model.Lambda.real)[::-1], [0.9, 0.8],
                           atol=1e-10)
        assert np.allclose(model.Lambda.imag, 0.0, atol=1e-10)

    def test_factor_shapes_and_orthonormality(self):
        pair, _ = random_pair(6, n=4, t=30)
        model = dmd_reduced(pair, RankRule(kind="fixed", r=3))
        assert model.U_r.shape == (4, 3)
        assert model.V_r.shape == (30, 3)
        assert model.K_r.shape == (3, 3)
        assert np.allclose(model.U_r.T @ model.U_r, np.eye(3), atol=1e-12)
        assert np.allclose(model.V_r.T @ model.V_r, np.eye(3), atol=1e-12)

    def test_internal_identities(self):
        pair, _ = random_pair(7, n=4, t=25)
        model = dmd_reduced(pair, RankRule(kind="fixed", r=4))
        b = pair.PhiPrime @ (model.V_r / model.Sigma_r)
        assert np.allclose(model.K_r, model.U_r.T @ b, atol=1e-12)
        assert np.allclose(model.Upsilon, b @ model.W, atol=1e-12)
        # K_r W = W diag(Lambda)
        assert np.allclose(model.K_r @ model.W,
                           model.W * model.Lambda[None, :], atol=1e-10)

    def test_eigenvalue_ordering(self):
        # modulus 0.95 conjugate pair first, then 0.5
        theta = 0.3
        rot = 0.95 * np.array([[np.cos(theta), -np.sin(theta)],
                               [np.sin(theta), np.cos(theta)]])
        a = np.zeros((3, 3))
        a[:2, :2] = rot
        a[2, 2] = 0.5
        pair, _ = random_pair(8, n=3, t=40, a=a)
        model = dmd_reduced(pair, RankRule(kind="fixed", r=3))
        lam = model.Lambda
        assert np.all(np.abs(lam)[:-1] >= np.abs(lam)[1:] - 1e-12)
        # conjugates adjacent with the negative phase first
        assert lam[0] == pytest.approx(lam[1].conjugate(), abs=1e-10)
        assert np.angle(lam[0]) < np.angle(lam[1])
        assert lam[2] == pytest.approx(0.5, abs=1e-10)

    def test_defective_operator_warns(self):
        # Jordan block: eigenvector matrix is numerically singular
        target = np.array([[1.0, 1.0], [0.0, 1.0]])
        pair = SnapshotPair(Phi=np.eye(2), PhiPrime=target)
        with pytest.warns(IllConditionedWarning):
            dmd_reduced(pair, RankRule(kind="fixed", r=2))

    def test_rank_truncated_operator_matches_dmd_full(self):
        # same operator through two routes: reduced factors vs a full
        # fit with the pseudoinverse cutoff placed below sigma_r
        pair, _ = random_pair(9, n=5, t=40)
        model = dmd_reduced(pair, RankRule(kind="fixed", r=3))
        sigma = np.linalg.svd(pair.Phi, compute_uv=False)
        cut = 0.5 * (sigma[2] + sigma[3]) / sigma[0]
        direct = dmd_full(pair, tol=cut).K
        assert np.allclose(rank_truncated_operator(pair, model), direct,
                           atol=1e-10)


class TestPredict:
    def test_predict_full_matches_power_iteration(self):
        pair, a = random_pair(10, n=3, t=20)
        model = dmd_full(pair)
        x0 = np.array([0.3, -1.2, 0.7])
        out = predict_full(model, x0, 6)
        assert out.shape == (3, 7)
        x = x0.copy()
        for t in range(1, 7):
            x = model.K @ x
            assert np.allclose(out[:, t], x)
        assert np.array_equal(out[:, 0], x0)

    def test_predict_reduced_matches_full_on_exact_system(self):
        a = np.array([[0.9, 0.1], [0.0, 0.8]])
        pair, _ = random_pair(11, n=2, t=15, a=a)
        reduced = dmd_reduced(pair, RankRule(kind="fixed", r=2))
        x0 = np.array([1.0, -0.5])
        want = predict_full(dmd_full(pair), x0, 8)
        got = predict_reduced(reduced, x0, 8)
        assert np.allclose(got, want, atol=1e-8)

    def test_predict_reduced_initial_column_is_projection(self):
        pair, _ = random_pair(12, n=4, t=30)
        model = dmd_reduced(pair, RankRule(kind="fixed", r=2))
        x0 = np.array([1.0, 2.0, -1.0, 0.5])
        out = predict_reduced(model, x0, 3)
        proj = np.real(model.Upsilon @ (np.linalg.pinv(model.Upsilon) @ x0))
        assert np.allclose(out[:, 0], proj, atol=1e-12)

    def test_validation(self):
        pair, _ = random_pair(13)
        model = dmd_full(pair)
        with pytest.raises(ConfigError):
            predict_full(model, np.zeros(3), -1)
        with pytest.raises(ShapeError):
            predict_full(model, np.zeros(4), 2)


class TestRidge:
    @given(st.integers(0, 100), st.floats(1e-4, 10.0))
    @settings(max_examples=40, deadline=None)
    def test_matches_normal_equations_oracle(self, seed, gamma):
        rng = np.random.Generator(np.random.PCG64(seed))
        x = rng.normal(size=(3, 20))
        y = rng.normal(size=(3, 20))
        pair = SnapshotPair(Phi=x, PhiPrime=y)
        k = ridge_dmd(pair, gamma)
        oracle = (y @ x.T) @ np.linalg.inv(x @ x.T + 20 * gamma * np.eye(3))
        assert np.linalg.norm(k - oracle, "fro") <= 1e-10 * max(
            1.0, np.linalg.norm(oracle, "fro"))

    def test_gamma_zero_equals_plain_fit(self):
        pair, _ = random_pair(14)
        assert np.allclose(ridge_dmd(pair, 0.0), dmd_full(pair).K, atol=1e-9)

    def test_ridge_shrinks_operator(self):
        pair, _ = random_pair(15)
        plain = np.linalg.norm(ridge_dmd(pair, 0.0), "fro")
        shrunk = np.linalg.norm(ridge_dmd(pair, 10.0), "fro")
        assert shrunk < plain

    def test_singular_shifted_gram_rejected(self):
        x = np.eye(2) @ np.ones((2, 5))  # rank one
        pair = SnapshotPair(Phi=np.vstack([x[0], x[0]]), PhiPrime=x)
        with pytest.raises(ConfigError):
            ridge_dmd(pair, 0.0)
        with pytest.raises(ConfigError):
            ridge_dmd(pair, np.inf)


class TestRecovery:
    def test_guard_passes_on_well_excited_data(self):
        pair, _ = random_pair(16, n=2, t=200)
        res = recover_regularized(pair, epsilon=0.01)
        assert res.guard_ok
        assert res.gamma == pytest.approx(-0.01 ** 2 / 12.0)
        assert res.lambda_min > 0.0

    def test_guard_trips_on_weakly_excited_direction(self):
        rng = np.random.Generator(np.random.PCG64(17))
        row = rng.normal(size=200)
        phi = np.vstack([row, row + 1e-6 * rng.normal(size=200)])
        pair = SnapshotPair(Phi=phi, PhiPrime=np.roll(phi, -1, axis=1))
        res = recover_regularized(pair, epsilon=0.5)
        assert not res.guard_ok
        # fallback keeps the problem convex: gamma = -lambda_min / (2T)
        assert res.gamma == pytest.approx(-0.5 * res.lambda_min / 200)
        assert np.all(np.isfinite(res.K))

    def test_recovery_moves_towards_clean_operator(self):
        # quantize a well-conditioned pair entrywise, then undo the bias
        from qdmd import DitherStream, QuantizerSpec, quantize_matrix

        rng = np.random.Generator(np.random.PCG64(18))
        a = np.array([[0.9, 0.1], [-0.05, 0.8]])
        x = rng.uniform(-0.9, 0.9, size=(2, 4000))
        pair = SnapshotPair(Phi=x, PhiPrime=a @ x)
        clean = dmd_full(pair).K
        spec = QuantizerSpec(-1.0, 1.0, 4)
        stream = DitherStream(spec, 99)
        xq, _ = quantize_matrix(spec, pair.Phi, stream)
        yq, _ = quantize_matrix(spec, pair.PhiPrime, stream)
        qpair = SnapshotPair(Phi=xq, PhiPrime=yq)
        res = recover_regularized(qpair, spec.resolution)
        assert res.guard_ok
        plain = dmd_full(qpair).K
        assert (np.linalg.norm(res.K - clean, "fro")
                < np.linalg.norm(plain - clean, "fro"))

    def test_epsilon_validation(self):
        pair, _ = random_pair(19)
        with pytest.raises(ConfigError):
            recover_regularized(pair, 0.0)


class TestObjectiveDecomposition:
    def test_sides_computed_as_documented(self):
        pair, a = random_pair(20, n=2, t=10)
        qpair, _ = random_pair(21, n=2, t=10)
        eps = 0.125
        out = objective_decomposition_check(pair, qpair, a, eps)
        t = 10
        lhs = np.linalg.norm(qpair.PhiPrime - a @ qpair.Phi, "fro") ** 2 / t
        var = eps ** 2 / 12.0
        rhs = (np.linalg.norm(pair.PhiPrime - a @ pair.Phi, "fro") ** 2 / t
               + 2 * var + var * np.linalg.norm(a, "fro") ** 2)
        assert out["lhs"] == pytest.approx(lhs)
        assert out["rhs"] == pytest.approx(rhs)
        assert out["gap"] == pytest.approx(lhs - rhs)

    def test_shape_checks(self):
        pair, a = random_pair(22, n=2, t=10)
        small, _ = random_pair(23, n=2, t=5)
        with pytest.raises(ShapeError):
            objective_decomposition_check(pair, small, a, 0.1)
        with pytest.raises(ShapeError):
            objective_decomposition_check(pair, pair, np.eye(3), 0.1)
