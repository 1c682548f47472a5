import numpy as np
import pytest
from numpy.testing import assert_allclose

from mcarma_ou import matpoly, mcarma, sampling, sim
from mcarma_ou.exceptions import NotStationaryError, TooShortError

from conftest import random_stable_model
from oracles import clt_band_for_zero_lags


def scalar_poly(*coeffs):
    return matpoly.LambdaMatrix(tuple(np.array([[c]], dtype=float) for c in coeffs))


def scalar_model(a_coeffs, b_coeffs, sigma=1.0):
    return mcarma.McarmaModel.build(
        scalar_poly(*a_coeffs), scalar_poly(*b_coeffs), np.array([[sigma]]))


@pytest.fixture(scope="module")
def example_decomp(example_model, example_set_12):
    return mcarma.decompose(example_model, example_set_12)


def brownian(seed, sigma):
    return sim.DriverSpec(kind="brownian", seed=seed, sigma_L=sigma)


class TestReproducibility:
    def test_same_seed_bit_identical(self, example_decomp):
        driver = brownian(7, np.eye(2))
        a = sim.simulate(example_decomp, driver, 0.1, 500, stationary_start=True)
        b = sim.simulate(example_decomp, driver, 0.1, 500, stationary_start=True)
        assert np.array_equal(a.Y, b.Y)

    def test_different_seed_differs(self, example_decomp):
        a = sim.simulate(example_decomp, brownian(7, np.eye(2)), 0.1, 500)
        b = sim.simulate(example_decomp, brownian(8, np.eye(2)), 0.1, 500)
        assert not np.array_equal(a.Y, b.Y)

    def test_compound_poisson_reproducible(self, example_decomp):
        driver = sim.DriverSpec(kind="compound_poisson", seed=3, rate=2.0,
                                jump_cov=0.5 * np.eye(2))
        a = sim.simulate(example_decomp, driver, 0.1, 300)
        b = sim.simulate(example_decomp, driver, 0.1, 300)
        assert np.array_equal(a.Y, b.Y)


class TestDegenerateCases:
    def test_zero_driver_zero_path(self, example_model, example_set_12):
        decomp = mcarma.decompose(example_model, example_set_12)
        driver = brownian(0, np.zeros((2, 2)))
        path = sim.simulate(decomp, driver, 0.1, 200)
        assert np.max(np.abs(path.Y)) == 0.0

    def test_stationary_start_needs_stability(self):
        model = scalar_model([1, -0.5], [1.0])
        decomp = mcarma.decompose(model, model.solvent_set())
        with pytest.raises(NotStationaryError):
            sim.simulate(decomp, brownian(0, np.array([[1.0]])), 0.1, 100,
                         stationary_start=True)

    def test_path_shape_and_grid(self, example_decomp):
        path = sim.simulate(example_decomp, brownian(1, np.eye(2)), 0.25, 64)
        assert path.Y.shape == (64, 2)
        assert path.h == 0.25
        assert path.max_imag <= 1e-8


class TestScalarOu:
    def test_lag_one_autocorrelation(self):
        a, h, n = 1.0, 0.2, 100_000
        model = scalar_model([1, a], [1.0])
        decomp = mcarma.decompose(model, model.solvent_set())
        path = sim.simulate(decomp, brownian(12345, np.array([[1.0]])), h, n,
                            stationary_start=True)
        gammas = sim.empirical_acvf(path, 1)
        rho = gammas[1][0, 0] / gammas[0][0, 0]
        want = np.exp(-a * h)
        band = 3.0 * np.sqrt((1 - want ** 2) / n)
        assert abs(rho - want) < band

    def test_noise_variance(self):
        a, res, h, n = 2.0, 1.5, 0.5, 100_000
        model = scalar_model([1, a], [res])
        decomp = mcarma.decompose(model, model.solvent_set())
        path = sim.simulate(decomp, brownian(99, np.array([[1.0]])), h, n,
                            stationary_start=True)
        _, phi, _ = sampling.varma_ar(decomp.solvent_set, h)
        U = sim.extract_noise(path, phi)
        want = res ** 2 * (1 - np.exp(-2 * a * h)) / (2 * a)
        got = U.var()
        band = 3.0 * want * np.sqrt(2.0 / U.shape[0])
        assert abs(got - want) < band


class TestEmpiricalAcvf:
    def test_constant_path(self):
        Y = np.ones((1000, 2))
        gammas = sim.empirical_acvf(Y, 3)
        for g in gammas:
            assert np.max(np.abs(g)) == 0.0

    def test_white_noise(self):
        rng = np.random.default_rng(5)
        Y = rng.standard_normal((100_000, 2))
        gammas = sim.empirical_acvf(Y, 1)
        band = 3.0 / np.sqrt(Y.shape[0])
        assert np.max(np.abs(gammas[0] - np.eye(2))) < 3.0 * np.sqrt(2.0 / Y.shape[0])
        assert np.max(np.abs(gammas[1])) < band

    def test_too_short(self):
        with pytest.raises(TooShortError):
            sim.empirical_acvf(np.zeros((50, 1)), 5)


class TestExtractNoise:
    def test_shape(self, example_decomp):
        path = sim.simulate(example_decomp, brownian(2, np.eye(2)), 0.1, 1000)
        _, phi, _ = sampling.varma_ar(example_decomp.solvent_set, 0.1)
        U = sim.extract_noise(path, phi)
        assert U.shape == (998, 2)

    def test_recursion_inverts(self, example_decomp):
        path = sim.simulate(example_decomp, brownian(2, np.eye(2)), 0.1, 50)
        _, phi, _ = sampling.varma_ar(example_decomp.solvent_set, 0.1)
        U = sim.extract_noise(path, phi)
        n = 10
        want = path.Y[n] - phi[0] @ path.Y[n - 1] - phi[1] @ path.Y[n - 2]
        assert_allclose(U[n - 2], want, atol=1e-12)

    def test_attach_noise(self, example_decomp):
        path = sim.simulate(example_decomp, brownian(2, np.eye(2)), 0.1, 50)
        assert path.U is None
        _, phi, _ = sampling.varma_ar(example_decomp.solvent_set, 0.1)
        carried = sim.attach_noise(path, phi)
        assert carried.U.shape == (48, 2)
        assert np.array_equal(carried.Y, path.Y)

    def test_noise_acvf_matches_analytic(self, example_model, example_decomp):
        h, n = 0.1, 100_000
        path = sim.simulate(example_decomp, brownian(2024, np.eye(2)), h, n,
                            stationary_start=True)
        sv = sampling.sampled_varma(example_decomp, h)
        U = sim.extract_noise(path, list(sv.phi))
        centered = U - U.mean(axis=0)
        n_eff = U.shape[0]
        # lags 0..p-1 match the analytic values inside a generous CLT band
        for lag in range(2):
            est = centered[lag:].T @ centered[:n_eff - lag] / n_eff
            band = clt_band_for_zero_lags(list(sv.gamma_U), n_eff, level=4.0) + \
                4.0 * np.abs(sv.gamma_U[lag]) / np.sqrt(n_eff)
            assert np.all(np.abs(est - sv.gamma_U[lag]) < band)

    def test_noise_vanishes_beyond_lag_p(self, example_model, example_decomp):
        h, n = 0.1, 100_000
        path = sim.simulate(example_decomp, brownian(31337, np.eye(2)), h, n,
                            stationary_start=True)
        sv = sampling.sampled_varma(example_decomp, h)
        U = sim.extract_noise(path, list(sv.phi))
        centered = U - U.mean(axis=0)
        n_eff = U.shape[0]
        band = clt_band_for_zero_lags(list(sv.gamma_U), n_eff)  # 99% level
        for lag in range(2, 6):
            est = centered[lag:].T @ centered[:n_eff - lag] / n_eff
            assert np.all(np.abs(est) < band)

    def test_noise_whiteness_on_statespace_recursion(self, example_model,
                                                     example_decomp):
        # the AR coefficients also whiten paths from the exact sampled state
        # recursion, which never touches the solvent machinery
        h, n = 0.1, 100_000
        path = sim.simulate_statespace_twin(example_decomp, np.eye(2), h, n,
                                            seed=90210, stationary_start=True)
        sv = sampling.sampled_varma(example_decomp, h)
        U = sim.extract_noise(path, list(sv.phi))
        centered = U - U.mean(axis=0)
        n_eff = U.shape[0]
        band = clt_band_for_zero_lags(list(sv.gamma_U), n_eff)
        for lag in range(2, 6):
            est = centered[lag:].T @ centered[:n_eff - lag] / n_eff
            assert np.all(np.abs(est) < band)


class TestDistributionalExactness:
    def test_matches_statespace_twin(self, example_model, example_decomp):
        h, n = 0.1, 60_000
        a = sim.simulate(example_decomp, brownian(51, np.eye(2)), h, n,
                         stationary_start=True)
        b = sim.simulate_statespace_twin(example_decomp, np.eye(2), h, n,
                                         seed=52, stationary_start=True)
        ga = sim.empirical_acvf(a, 1)
        gb = sim.empirical_acvf(b, 1)
        # two-sample comparison: each estimate carries its own CLT noise
        band = 4.0 * np.sqrt(2.0) * np.linalg.norm(ga[0]) / np.sqrt(n / 10)
        for x, y in zip(ga, gb):
            assert np.max(np.abs(x - y)) < band

    def test_solvent_sets_statistically_equivalent(
            self, example_model, example_set_12, example_set_34):
        h, n = 0.1, 60_000
        d12 = mcarma.decompose(example_model, example_set_12)
        d34 = mcarma.decompose(example_model, example_set_34)
        a = sim.simulate(d12, brownian(61, np.eye(2)), h, n, stationary_start=True)
        b = sim.simulate(d34, brownian(62, np.eye(2)), h, n, stationary_start=True)
        ga = sim.empirical_acvf(a, 2)
        gb = sim.empirical_acvf(b, 2)
        band = 4.0 * np.sqrt(2.0) * np.linalg.norm(ga[0]) / np.sqrt(n / 10)
        for x, y in zip(ga, gb):
            assert np.max(np.abs(x - y)) < band

    def test_empirical_acvf_matches_analytic(self, example_model, example_decomp):
        h, n = 0.1, 100_000
        path = sim.simulate(example_decomp, brownian(8080, np.eye(2)), h, n,
                            stationary_start=True)
        got = sim.empirical_acvf(path, 3)
        want = mcarma.stationary_acvf(example_decomp, [k * h for k in range(4)])
        scale = np.linalg.norm(want[0])
        # integrated autocorrelation time of the slowest mode inflates the band
        tau = 2.0 / (1.0 - np.exp(-h))
        band = 4.0 * scale * np.sqrt(tau / n)
        for g, w in zip(got, want):
            assert np.max(np.abs(g - w)) < band

    def test_compound_poisson_variance(self):
        # CP driver with Var L(1) = rate * jump_cov matches the Brownian ACVF
        a, h, n = 1.0, 0.25, 80_000
        model = scalar_model([1, a], [1.0], sigma=1.0)
        decomp = mcarma.decompose(model, model.solvent_set())
        driver = sim.DriverSpec(kind="compound_poisson", seed=404, rate=4.0,
                                jump_cov=np.array([[0.25]]))
        path = sim.simulate(decomp, driver, h, n, stationary_start=True)
        got = sim.empirical_acvf(path, 1)
        want = mcarma.stationary_acvf(decomp, [0.0, h])
        tau = 2.0 / (1.0 - np.exp(-a * h))
        band = 5.0 * want[0][0, 0] * np.sqrt(tau / n)
        assert abs(got[0][0, 0] - want[0][0, 0]) < band
        assert abs(got[1][0, 0] - want[1][0, 0]) < band


class TestPsdRepair:
    def test_tiny_negative_eigenvalue_clipped(self, caplog):
        mat = np.diag([1.0, -5e-13])
        factor = sim._psd_factor(mat, "test matrix")
        assert np.allclose(factor @ factor.T, np.diag([1.0, 0.0]), atol=1e-12)

    def test_large_negative_eigenvalue_aborts(self):
        from mcarma_ou.exceptions import CholeskyFailError
        with pytest.raises(CholeskyFailError):
            sim._psd_factor(np.diag([1.0, -1e-6]), "test matrix")


class TestRectangularDriver:
    def test_driving_dimension_differs(self):
        # d = 2 output, m = 1 driver channel
        rng = np.random.default_rng(77)
        model_base = random_stable_model(rng, d=2, p=2, q=0)
        B = matpoly.LambdaMatrix((np.array([[1.0], [0.5]]),))
        model = mcarma.McarmaModel.build(model_base.A, B, np.array([[1.0]]))
        decomp = mcarma.decompose(model, model.solvent_set())
        driver = sim.DriverSpec(kind="brownian", seed=5, sigma_L=np.array([[1.0]]))
        path = sim.simulate(decomp, driver, 0.1, 2000, stationary_start=True)
        assert path.Y.shape == (2000, 2)
        cp = sim.DriverSpec(kind="compound_poisson", seed=5, rate=2.0,
                            jump_cov=np.array([[0.5]]))
        path2 = sim.simulate(decomp, cp, 0.1, 500)
        assert path2.Y.shape == (500, 2)


class TestGramianConsistency:
    def test_state_gramian_matches_block_transform(self, example_decomp):
        # T [Sigma_{nu,mu}] T^H is the Gramian of the real state innovation
        h = 0.1
        Q = sim.state_innovation_gramian(example_decomp, np.eye(2), h)
        ss = example_decomp.statespace
        import scipy.linalg as sla
        nd = ss.dim
        block = np.zeros((2 * nd, 2 * nd))
        block[:nd, :nd] = -ss.A_star
        block[:nd, nd:] = ss.B_star @ np.eye(2) @ ss.B_star.T
        block[nd:, nd:] = ss.A_star.T
        want = sla.expm(h * ss.A_star) @ sla.expm(h * block)[:nd, nd:]
        assert np.max(np.abs(Q - want)) < 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_state_gramian_random(self, seed):
        rng = np.random.default_rng(1300 + seed)
        model = random_stable_model(rng, d=2, p=2)
        decomp = mcarma.decompose(model, model.solvent_set())
        h = 0.2
        Q = sim.state_innovation_gramian(decomp, model.sigma_L, h)
        assert np.max(np.abs(Q - Q.T)) < 1e-10 * max(1.0, np.max(np.abs(Q)))
        assert np.min(np.linalg.eigvalsh(Q)) > -1e-12
