import numpy as np
import pytest

from ambitsim import estimation as est
from ambitsim.rng import stream


class TestSummarize:
    def test_constant_samples(self):
        s = est.summarize(np.full(50, 3.0))
        assert s.variance == 0.0
        assert s.k[3] == pytest.approx(0.0, abs=1e-12)
        assert s.k[4] == pytest.approx(0.0, abs=1e-12)

    def test_standard_normal_k4(self):
        x = stream(21).standard_normal(100_000)
        s = est.summarize(x)
        assert abs(s.k[4]) < 3 * s.se[4]

    def test_poisson_cumulants(self):
        x = stream(22).poisson(2.0, 100_000).astype(float)
        s = est.summarize(x)
        for i in (1, 2, 3):
            assert abs(s.k[i] - 2.0) < 3 * s.se[i], f"order {i}"

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            est.summarize([1.0])

    def test_kstats_match_central_moment_formulas(self):
        x = stream(23).gamma(2.0, size=500)
        n = x.size
        m = [np.mean((x - x.mean()) ** r) for r in range(5)]
        s = est.summarize(x)
        assert s.k[2] == pytest.approx(n / (n - 1) * m[2])
        assert s.k[3] == pytest.approx(n ** 2 * m[3] / ((n - 1) * (n - 2)))
        k4 = (n ** 2 * ((n + 1) * m[4] - 3 * (n - 1) * m[2] ** 2)
              / ((n - 1) * (n - 2) * (n - 3)))
        assert s.k[4] == pytest.approx(k4)

    def test_recovery_scales_with_root_n(self):
        # analytic gamma(shape=2, scale=1) cumulants: k_i = 2 * (i-1)!
        target = {1: 2.0, 2: 2.0, 3: 4.0, 4: 12.0}
        summaries = []
        for n in (1_000, 10_000, 100_000):
            s = est.summarize(stream(26).gamma(2.0, size=n))
            for i in range(1, 5):
                assert abs(s.k[i] - target[i]) < 3 * s.se[i], f"order {i}, n={n}"
            summaries.append(s)
        # SEs of the stable low orders shrink like n^{-1/2}; across the whole
        # 1e3 -> 1e5 range the realised errors shrink for every order
        for coarse, fine in zip(summaries, summaries[1:]):
            for i in (1, 2):
                assert 1.5 < coarse.se[i] / fine.se[i] < 7.0, f"order {i}"
        first, last = summaries[0], summaries[-1]
        for i in range(1, 5):
            assert abs(last.k[i] - target[i]) < abs(first.k[i] - target[i]), f"order {i}"

    def test_to_dict_schema(self):
        d = est.summarize(stream(1).normal(size=100)).to_dict()
        assert d["schema_version"] == est.SCHEMA_VERSION
        assert set(d["cumulants"]) == {"1", "2", "3", "4"}


class TestEmpiricalCF:
    def test_zero_is_one(self):
        t = est.empirical_cf(stream(2).normal(size=1000), [0.0])
        assert t.value[0] == pytest.approx(1.0)
        assert t.se_re[0] == 0.0

    def test_symmetric_samples_imaginary_part(self):
        x = stream(3).normal(size=50_000)
        t = est.empirical_cf(x, [0.7, 1.5])
        assert np.all(np.abs(t.value.imag) < 3 * np.maximum(t.se_im, 1e-12))

    def test_standard_normal_value(self):
        x = stream(4).normal(size=100_000)
        t = est.empirical_cf(x, [1.0])
        assert abs(t.value[0].real - np.exp(-0.5)) < 3 * t.se_re[0]

    def test_log_cf_delta_method(self):
        x = stream(5).normal(size=100_000)
        t = est.empirical_cf(x, [1.0])
        logv, se = t.log()
        assert abs(logv[0].real + 0.5) < 3 * se[0]


class TestEmpiricalACF:
    def test_white_noise(self):
        paths = stream(6).normal(size=(400, 200))
        table = est.empirical_acf(paths, [1, 3, 7])
        for lag, (v, se) in table.items():
            assert abs(v) < 3.5 * se + 0.01, f"lag {lag}"

    def test_ou_closed_form(self):
        lam, dt, n, reps = 0.8, 0.05, 2000, 200
        rng = stream(7)
        rho = np.exp(-lam * dt)
        innov = rng.normal(size=(reps, n)) * np.sqrt(1 - rho ** 2)
        paths = np.empty((reps, n))
        paths[:, 0] = rng.normal(size=reps)
        for i in range(1, n):
            paths[:, i] = rho * paths[:, i - 1] + innov[:, i]
        table = est.empirical_acf(paths, [10, 20])
        step_rho = np.exp(-lam * dt)
        # Marriott-Pope style short-path bias, O((1 + 2 rho/(1-rho))/n)
        bias_allow = (1 + 2 * step_rho / (1 - step_rho)) / n
        for lag, (v, se) in table.items():
            want = np.exp(-lam * dt * lag)
            assert abs(v - want) < 3 * se + 2 * bias_allow, f"lag {lag}"

    def test_lag_beyond_length(self):
        with pytest.raises(ValueError):
            est.empirical_acf(np.zeros((3, 10)), [10])

    def test_lag_zero_is_one(self):
        assert est.empirical_acf(stream(8).normal(size=(5, 50)), [0])[0][0] == 1.0


class TestPairedHelpers:
    def test_cov_with_se(self):
        rng = stream(9)
        x = rng.normal(size=100_000)
        y = 0.6 * x + 0.8 * rng.normal(size=100_000)
        c, se = est.cov_with_se(x, y)
        assert abs(c - 0.6) < 3 * se

    def test_corr_with_se(self):
        rng = stream(10)
        x = rng.normal(size=50_000)
        y = 0.5 * x + np.sqrt(0.75) * rng.normal(size=50_000)
        r, se = est.corr_with_se(x, y)
        assert abs(r - 0.5) < 3 * se
