import numpy as np
import pytest
from scipy import integrate

from ambitsim import ambit_field as af
from ambitsim import estimation as est
from ambitsim import geometry as geo
from ambitsim import levy_basis as lb
from ambitsim import trawl as tw
from ambitsim import volatility as vol
from ambitsim.rng import stream, substream


def gaussian(a=0.0, b=1.0):
    return lb.LevySeed(lb.CharacteristicQuadruplet(a=a, b=b))


def poisson(lam):
    return lb.LevySeed(lb.CharacteristicQuadruplet(levy_measure=lb.PoissonAtom(lam)))


def cp(lam, rate):
    return lb.LevySeed(lb.CharacteristicQuadruplet(
        levy_measure=lb.CompoundPoisson(lam, lb.ExponentialMark(rate))))


BOX = geo.ProductAmbitSet(box=(0.0, 1.0), t_back=1.0)
EXP_KERNEL = af.Kernel(fn=lambda ux, ut: np.exp(-ut),
                       dt_fn=lambda ux, ut: -np.exp(-ut))


class TestCheckIntegrability:
    def test_gaussian_bounded_kernel_all_finite(self):
        spec = af.AmbitFieldSpec(seed=gaussian(a=0.5, b=1.0), ambit=BOX,
                                 kernel=EXP_KERNEL)
        grid = af.SimulationGrid(times=(0.0,), xs=(0.0,), dx=0.02, dt=0.02)
        rep = af.check_integrability(spec, grid)
        assert rep.all_finite
        # independent adaptive-quadrature oracle for each integral
        i2, _ = integrate.dblquad(lambda s, xi: np.exp(-2 * (0.0 - s)),
                                  0.0, 1.0, -1.0, 0.0)
        i1, _ = integrate.dblquad(lambda s, xi: 0.5 * np.exp(-(0.0 - s)),
                                  0.0, 1.0, -1.0, 0.0)
        assert rep.gaussian_integral == pytest.approx(i2, rel=1e-3)
        assert rep.drift_integral == pytest.approx(i1, rel=1e-3)
        assert rep.jump_integral == 0.0

    def test_zero_kernel(self):
        spec = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX,
                                 kernel=af.Kernel(fn=lambda ux, ut: np.zeros(
                                     np.broadcast(ux, ut).shape), time_free=True))
        grid = af.SimulationGrid(times=(0.0,), xs=(0.0,), dx=0.1, dt=0.1)
        rep = af.check_integrability(spec, grid)
        assert rep.drift_integral == 0.0
        assert rep.gaussian_integral == 0.0
        assert rep.jump_integral == 0.0

    def test_gamma_seed_singular_kernel_square_integrable(self):
        # h(u) = u^{-1/2} near the time edge: V2 grows only logarithmically,
        # so the jump condition stays finite
        seed = lb.LevySeed(lb.CharacteristicQuadruplet(levy_measure=lb.GammaJumps(2.0)))
        kernel = af.Kernel(fn=lambda ux, ut: np.maximum(ut, 1e-12) ** -0.5)
        spec = af.AmbitFieldSpec(seed=seed, ambit=BOX, kernel=kernel)
        grid = af.SimulationGrid(times=(0.0,), xs=(0.0,), dx=0.5, dt=2e-3)
        rep = af.check_integrability(spec, grid)
        assert rep.verdicts["jump"] == "finite"
        # oracle: adaptive quadrature of V2 along time, stabilised far below 1e-4
        measure = seed.levy_measure
        oracle, err = integrate.quad(lambda u: measure.min1_sq(u ** -0.5), 0, 1,
                                     limit=400)
        assert err < 1e-6 * oracle
        coarse = rep.coarse_values["jump"]
        assert abs(rep.jump_integral - oracle) < abs(coarse - oracle)
        assert rep.jump_integral == pytest.approx(oracle, rel=5e-3)


class TestSimulateField:
    def test_trawl_reduction_identical_path(self):
        trawl = geo.ExponentialTrawl(0.7)
        seed = gaussian(b=1.0)
        times = (0.0, 0.5, 1.0)
        spec = af.AmbitFieldSpec(seed=seed, ambit=geo.TrawlAmbitSet(trawl))
        grid = af.SimulationGrid(times=times, xs=(0.0,), dx=0.05, dt=0.05)
        fld = af.simulate_field(spec, grid, master_seed=9, n_replicates=16)
        ref = tw.simulate_grid(tw.TrawlModel(trawl, seed), list(times), 0.05, 0.05,
                               master_seed=9, n_replicates=16)
        assert np.max(np.abs(fld.values[:, :, 0] - ref.values)) < 1e-12

    def test_variance_matches_kernel_integral(self):
        sig2 = vol.DeterministicVol(fn=lambda x, t: 1.0 + 0.5 * np.sin(np.asarray(x)) ** 2)
        spec = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX,
                                 kernel=EXP_KERNEL, vol=sig2)
        grid = af.SimulationGrid(times=(0.0,), xs=(0.0,), dx=0.025, dt=0.025)
        fld = af.simulate_field(spec, grid, master_seed=21, n_replicates=4000)
        want, _ = integrate.dblquad(
            lambda s, xi: np.exp(-2 * (0.0 - s)) * (1.0 + 0.5 * np.sin(xi) ** 2),
            0.0, 1.0, -1.0, 0.0)
        v, se = est.var_with_se(fld.values[:, 0, 0])
        assert abs(v - want) < 3 * se + 0.01 * want

    def test_level_with_zero_kernel(self):
        spec = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX, mu=5.0,
                                 kernel=af.Kernel(fn=lambda ux, ut: np.zeros(
                                     np.broadcast(ux, ut).shape), time_free=True))
        grid = af.SimulationGrid(times=(0.0, 1.0), xs=(0.0, 0.5), dx=0.1, dt=0.1)
        fld = af.simulate_field(spec, grid, master_seed=22, n_replicates=3)
        assert np.allclose(fld.values, 5.0)

    def test_linearity_in_kernel_on_shared_basis(self):
        k2 = af.Kernel(fn=lambda ux, ut: 2.0 * np.exp(-ut))
        base = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX, kernel=EXP_KERNEL)
        double = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX, kernel=k2)
        grid = af.SimulationGrid(times=(0.0, 0.5), xs=(0.0,), dx=0.05, dt=0.05)
        a = af.simulate_field(base, grid, master_seed=23, n_replicates=8)
        b = af.simulate_field(double, grid, master_seed=23, n_replicates=8)
        assert np.allclose(b.values, 2.0 * a.values, atol=1e-14)

    def test_drift_term(self):
        spec = af.AmbitFieldSpec(
            seed=gaussian(b=1.0), ambit=BOX,
            kernel=af.Kernel(fn=lambda ux, ut: np.zeros(np.broadcast(ux, ut).shape),
                             time_free=True),
            drift_kernel=af.Kernel(fn=lambda ux, ut: np.ones(np.broadcast(ux, ut).shape),
                                   time_free=True),
            drift_field=lambda xi, s: 2.0 * np.ones(np.broadcast(xi, s).shape))
        grid = af.SimulationGrid(times=(0.0,), xs=(0.0,), dx=0.05, dt=0.05)
        fld = af.simulate_field(spec, grid, master_seed=24, n_replicates=2)
        assert np.allclose(fld.values, 2.0 * BOX.measure())

    def test_window_budget_error(self):
        spec = af.AmbitFieldSpec(seed=gaussian(b=1.0),
                                 ambit=geo.TrawlAmbitSet(geo.ExponentialTrawl(0.7)))
        grid = af.SimulationGrid(times=(0.0,), xs=(0.0,), dx=0.1, dt=0.1, t_back=1.0)
        with pytest.raises(ValueError, match="truncation budget"):
            af.simulate_field(spec, grid, master_seed=1)


class TestItoIsometry:
    def test_zero_mean_basis_second_moment(self):
        # E[(int zeta dL)^2] = E int zeta^2 dQ with Q = sigma^2 Var(L') cellvol
        trawl_vol = vol.tempo_spatial_trawl_vol(geo.ExponentialTrawl(1.0), "identity",
                                                lb.LevySeed(lb.CharacteristicQuadruplet(
                                                    levy_measure=lb.GammaJumps(1.0))),
                                                dx=0.1, dt=0.1)
        spec = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX,
                                 kernel=EXP_KERNEL, vol=trawl_vol)
        grid = af.SimulationGrid(times=(0.0,), xs=(0.0,), dx=0.1, dt=0.1)
        cells = af.build_cells(spec, grid)
        R = 1500
        lhs = np.empty(R)
        rhs = np.empty(R)
        for r in range(R):
            rng = substream(31, r)
            sig = af._sigma_flat(spec, cells, rng)
            d_l = spec.seed.sample_increments(cells.volume, rng, size=cells.XI.size)
            w = cells.weights[:, 0]
            lhs[r] = (np.sum(w * sig * d_l)) ** 2
            rhs[r] = np.sum(w ** 2 * sig ** 2) * spec.seed.variance * cells.volume
        m1, s1 = est.mean_with_se(lhs)
        m2, s2 = est.mean_with_se(rhs)
        assert abs(m1 - m2) < 3 * np.hypot(s1, s2)


class TestConditionalCumulant:
    grid = af.SimulationGrid(times=(0.0,), xs=(0.0,), dx=0.05, dt=0.05)

    def _lattice_shape(self, spec):
        cells = af.build_cells(spec, self.grid)
        return cells.s_centers.size, cells.xi.size

    def test_unit_sigma_gaussian(self):
        spec = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX)
        ns, nx = self._lattice_shape(spec)
        got = af.conditional_cumulant(spec, np.ones((ns, nx)), 1.3, 0.0, 0.0, self.grid)
        assert got == pytest.approx(-0.5 * 1.3 ** 2 * BOX.measure(), abs=1e-12)

    def test_scaled_sigma_gaussian(self):
        spec = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX)
        ns, nx = self._lattice_shape(spec)
        got = af.conditional_cumulant(spec, 4.0 * np.ones((ns, nx)), 1.0, 0.0, 0.0,
                                      self.grid)
        assert got == pytest.approx(-2.0 * BOX.measure(), abs=1e-12)

    def test_poisson_seed_against_frozen_field_simulation(self):
        spec0 = af.AmbitFieldSpec(seed=poisson(1.0), ambit=BOX, kernel=EXP_KERNEL)
        cells = af.build_cells(spec0, self.grid)
        ns, nx = cells.s_centers.size, cells.xi.size
        frozen = 0.5 + stream(33).uniform(0, 1, (ns, nx))
        spec = af.AmbitFieldSpec(seed=poisson(1.0), ambit=BOX, kernel=EXP_KERNEL,
                                 vol=vol.FrozenVol(values=frozen))
        fld = af.simulate_field(spec, self.grid, master_seed=34, n_replicates=20_000)
        samples = fld.values[:, 0, 0]
        for z in np.linspace(-2, 2, 5):
            if z == 0:
                continue
            want = af.conditional_cumulant(spec, frozen, z, 0.0, 0.0, self.grid)
            table = est.empirical_cf(samples, [z])
            logv, se = table.log()
            assert abs(complex(logv[0]) - want) < 3.5 * se[0], f"zeta={z}"

    def test_second_derivative_matches_conditional_variance(self):
        spec = af.AmbitFieldSpec(seed=poisson(2.0), ambit=BOX, kernel=EXP_KERNEL)
        cells = af.build_cells(spec, self.grid)
        ns, nx = cells.s_centers.size, cells.xi.size
        frozen = 1.0 + 0.3 * stream(35).uniform(0, 1, (ns, nx))
        so = af.second_order(spec, self.grid)
        sig_flat = np.sqrt(frozen).ravel()[cells.keep]
        want = so.conditional_covariance(sig_flat, 0.0, 0.0, 0.0, 0.0)

        def c2(eps):
            vals = [af.conditional_cumulant(spec, frozen, z, 0.0, 0.0, self.grid)
                    for z in (-eps, 0.0, eps)]
            return -(vals[0] - 2 * vals[1] + vals[2]).real / eps ** 2

        coarse, fine = c2(2e-2), c2(1e-2)
        got = (4 * fine - coarse) / 3
        assert got == pytest.approx(want, rel=1e-4)


class TestSecondOrder:
    def test_deterministic_unit_vol_reduces_to_overlap_formula(self):
        seed = cp(2.0, 1.5)
        spec = af.AmbitFieldSpec(seed=seed, ambit=BOX)
        grid = af.SimulationGrid(times=(0.0, 0.4), xs=(0.0,), dx=0.05, dt=0.05)
        so = af.second_order(spec, grid)
        got, se = so.covariance(0.0, 0.0, 0.0, 0.4)
        assert se == 0.0
        want = BOX.box[1] * (BOX.t_back - 0.4) * seed.variance  # Leb(A cap A_h) Var(L')
        assert got == pytest.approx(want, abs=1e-12)
        assert so.mean(0.0, 0.0) == pytest.approx(BOX.measure() * seed.mean, abs=1e-12)

    def test_zero_mean_seed_drops_vol_covariance_term(self):
        outvf = vol.OUTVF(lam=1.0, mu=1.0, kappa=1.0, y_seed=cp(2.0, 2.0),
                          x_seed=cp(4.0, 2.0), slab_dx=0.05)
        spec = af.AmbitFieldSpec(seed=gaussian(b=1.0), ambit=BOX, vol=outvf)
        grid = af.SimulationGrid(times=(0.0,), xs=(0.25,), dx=0.1, dt=0.1)
        so = af.second_order(spec, grid, vol_mc=400, master_seed=41)
        got, se = so.variance(0.25, 0.0)
        # with E L' = 0 only the E(sigma^2) term survives; oracle from the
        # analytic OUTVF mean at the cell abscissae
        cells = so.cells
        mask, h = so._mask_h(0.25, 0.0)
        want = sum(outvf.mean_sigma_sq(x) for x in cells.XI[mask]) \
            * cells.volume * spec.seed.variance / 1.0
        assert abs(got - want) < 3 * se + 0.02 * want

    def test_empirical_field_covariance_matches(self):
        seed = poisson(1.5)
        sig2 = vol.DeterministicVol(fn=lambda x, t: 1.0 + 0.25 * np.cos(np.asarray(x)))
        spec = af.AmbitFieldSpec(seed=seed, ambit=BOX, kernel=EXP_KERNEL, vol=sig2)
        grid = af.SimulationGrid(times=(0.0, 0.3), xs=(0.0, 0.2), dx=0.05, dt=0.05)
        so = af.second_order(spec, grid)
        fld = af.simulate_field(spec, grid, master_seed=42, n_replicates=6000)
        want, _ = so.covariance(0.0, 0.0, 0.2, 0.3)
        got, se = est.cov_with_se(fld.values[:, 0, 0], fld.values[:, 1, 1])
        assert abs(got - want) < 3 * se
        m_want = so.mean(0.0, 0.0)
        m_got, m_se = est.mean_with_se(fld.values[:, 0, 0])
        assert abs(m_got - m_want) < 3 * m_se


class TestSemimartingale:
    def test_time_free_kernel_exact(self):
        kernel = af.Kernel(fn=lambda ux, ut: np.ones(np.broadcast(ux, ut).shape),
                           time_free=True)
        out = af.semimartingale_decompose(kernel, gaussian(b=1.0), (0.0, 1.0),
                                          T=1.0, dt=0.05, dx=0.25, master_seed=51,
                                          n_replicates=4)
        assert np.all(out["fv"] == 0.0)
        assert np.allclose(out["lhs"], out["martingale"], atol=1e-14)

    def test_exponential_kernel_first_order_convergence(self):
        errs = []
        for dt in (0.02, 0.01, 0.005):
            out = af.semimartingale_decompose(EXP_KERNEL, gaussian(b=1.0), (0.0, 1.0),
                                              T=1.0, dt=dt, dx=0.1, master_seed=52,
                                              n_replicates=64)
            errs.append(np.abs(out["lhs"] - out["martingale"] - out["fv"])
                        .max(axis=1).mean())
        assert errs[1] / errs[0] < 0.75
        assert errs[2] / errs[1] < 0.75

    def test_linear_kernel_pathwise_identity(self):
        kernel = af.Kernel(fn=lambda ux, ut: ut,
                           dt_fn=lambda ux, ut: np.ones_like(np.asarray(ut)))
        dt = 0.01
        out = af.semimartingale_decompose(kernel, gaussian(b=1.0), (0.0, 1.0),
                                          T=1.0, dt=dt, dx=0.1, master_seed=53,
                                          n_replicates=16)
        # k(0) = 0, so the martingale part vanishes and lhs = int_0^t M_u du
        assert np.allclose(out["martingale"], 0.0)
        defect = np.abs(out["lhs"] - out["fv"]).max()
        assert defect < 10 * dt

    def test_missing_derivative_rejected(self):
        kernel = af.Kernel(fn=lambda ux, ut: np.exp(-ut))
        with pytest.raises(ValueError, match="derivative"):
            af.semimartingale_decompose(kernel, gaussian(b=1.0), (0.0, 1.0),
                                        T=1.0, dt=0.1, dx=0.5, master_seed=1)


class TestSimulateLSS:
    def test_ou_autocorrelation(self):
        lam = 1.0
        ts = [0.0, 0.5, 1.0, 2.0]
        out = af.simulate_lss(lambda u: np.exp(-lam * u), ts, 0.01, gaussian(b=1.0),
                              master_seed=61, n_replicates=5000)
        v = out["values"]
        for j, h in enumerate(ts[1:], start=1):
            r, se = est.corr_with_se(v[:, 0], v[:, j])
            assert abs(r - np.exp(-lam * h)) < 3 * se + 0.01, f"lag {h}"

    def test_zero_kernel_returns_level(self):
        out = af.simulate_lss(lambda u: np.zeros_like(np.asarray(u)), [0.0, 1.0],
                              0.05, gaussian(b=1.0), master_seed=62,
                              n_replicates=3, mu=2.5, t_back=1.0)
        assert np.allclose(out["values"], 2.5)

    def test_stochastic_vol_variance(self):
        lam = 1.0
        ouvol = vol.OUVolProcess(cp(2.0, 2.0), rate=1.5)
        out = af.simulate_lss(lambda u: np.exp(-lam * u), [0.0], 0.02,
                              gaussian(b=1.0), master_seed=63, n_replicates=6000,
                              vol_process=ouvol)
        want = ouvol.mean_sigma_sq * (1.0 / (2 * lam)) * 1.0
        v, se = est.var_with_se(out["values"][:, 0])
        assert abs(v - want) < 3 * se + 0.02 * want

    def test_drift_term(self):
        out = af.simulate_lss(lambda u: np.zeros_like(np.asarray(u)), [0.0], 0.01,
                              gaussian(b=1.0), master_seed=64, n_replicates=2,
                              drift_kernel=lambda u: np.exp(-u),
                              drift_fn=lambda s: np.ones_like(np.asarray(s)),
                              t_back=30.0)
        assert np.allclose(out["values"], 1.0, atol=1e-3)
