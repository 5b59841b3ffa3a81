"""Volatility modulation: stochastic integrands, subordination and mixing.

Four mechanisms are implemented.

* Squared-volatility random fields used as stochastic integrands: a
  deterministic field, kernel smoothing of a homogeneous basis (with the
  tempo-spatial trawl as the indicator-kernel special case) and the
  Ornstein-Uhlenbeck-type volatility field (OUTVF).
* Extended subordination of a basis by a density-based meta-time.
* The Levy measure of a subordinated basis, tabulated from the transition
  densities of the seed.
* Probability mixing and Levy mixing of seed parameters, including the supOU
  process obtained by mixing the OU rate.

OUTVF realisation
-----------------
The spatial supra-process is realised slab by slab: each slab of width dx
carries an independent stationary OU component whose driving subordinator has
its Levy measure thinned by dx.  For pure-jump drivers this reproduces the
required "slab width times the cumulant functional" scaling exactly, and the
spatial integral is a left-endpoint sum over slabs.  With an OU-type spatial
generator the resulting field is predictable, which is what feeding it into a
Walsh-type integral requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from . import geometry as geo
from .levy_basis import (CharacteristicQuadruplet, CompoundPoisson, GammaJumps,
                         InverseGaussianJumps, LevyMeasureSpec, LevySeed, Mixed,
                         NoJumps, PoissonAtom)
from .rng import substream

OU_WARMUP_EFOLDS = 25.0


class AdmissibilityError(ValueError):
    """A mixing measure violates the min(1, x^2) integrability condition."""


def thinned(measure: LevyMeasureSpec, factor: float) -> LevyMeasureSpec:
    """Levy measure scaled by ``factor`` (intensity thinning)."""
    if factor == 1.0:
        return measure
    if isinstance(measure, PoissonAtom):
        return PoissonAtom(measure.intensity * factor)
    if isinstance(measure, CompoundPoisson):
        return CompoundPoisson(measure.intensity * factor, measure.marks)
    if isinstance(measure, Mixed):
        return Mixed(tuple((w * factor, s) for w, s in measure.components))
    return Mixed(((factor, measure),))


def _is_finite_activity(measure: LevyMeasureSpec) -> bool:
    if isinstance(measure, (PoissonAtom, CompoundPoisson, NoJumps)):
        return True
    if isinstance(measure, Mixed):
        return all(_is_finite_activity(s) for _, s in measure.components)
    return False


# ---------------------------------------------------------------------------
# Stationary subordinator-driven OU processes
# ---------------------------------------------------------------------------

def _cp_jumps(measure, span, t0, rng):
    """Jump times and marks of a finite-activity subordinator on [t0, t0+span]."""
    if isinstance(measure, PoissonAtom):
        specs = [(measure.intensity, None)]
    elif isinstance(measure, CompoundPoisson):
        specs = [(measure.intensity, measure.marks)]
    else:  # Mixed of finite-activity components
        specs = []
        for w, s in measure.components:
            if isinstance(s, PoissonAtom):
                specs.append((w * s.intensity, None))
            else:
                specs.append((w * s.intensity, s.marks))
    times, marks = [], []
    for lam, mk in specs:
        n = rng.poisson(lam * span)
        times.append(rng.uniform(t0, t0 + span, n))
        marks.append(np.ones(n) if mk is None else mk.sample(rng, n))
    return np.concatenate(times), np.concatenate(marks)


def _ou_from_jumps(jump_times, marks, rate, times):
    dtm = times[:, None] - jump_times[None, :]
    w = np.where(dtm >= 0.0, np.exp(-rate * np.maximum(dtm, 0.0)), 0.0)
    return w @ marks


class StationaryOU:
    """X_t = integral_{-inf}^t e^{-rate (t-s)} dY_s for a subordinator Y.

    Finite-activity drivers are simulated exactly from their jump
    representation; infinite-activity subordinators (gamma, IG) use exact
    grid increments with an O(du) kernel-weighting bias.
    """

    def __init__(self, seed: LevySeed, rate: float, du: float | None = None):
        if rate <= 0:
            raise ValueError("rate must be positive")
        if not seed.is_subordinator:
            raise ValueError("driver must be a subordinator seed")
        self.seed = seed
        self.rate = rate
        self.du = du if du is not None else 0.02 / rate

    @property
    def mean(self):
        return self.seed.mean / self.rate

    @property
    def variance(self):
        return self.seed.variance / (2 * self.rate)

    def acf(self, h):
        return np.exp(-self.rate * np.abs(h))

    def sample(self, times, rng, n_replicates=None):
        """Stationary values at the given times; (n_replicates, len(times))."""
        times = np.asarray(times, dtype=float)
        t0 = times.min() - OU_WARMUP_EFOLDS / self.rate
        span = times.max() - t0
        squeeze = n_replicates is None
        reps = 1 if squeeze else n_replicates
        out = np.empty((reps, times.size))
        finite = _is_finite_activity(self.seed.levy_measure)
        for r in range(reps):
            if finite:
                jt, mk = _cp_jumps(self.seed.levy_measure, span, t0, rng)
                out[r] = _ou_from_jumps(jt, mk, self.rate, times)
                out[r] += self.seed.a / self.rate  # drift part of the driver
            else:
                n = int(np.ceil(span / self.du))
                centers = t0 + (np.arange(n) + 0.5) * self.du
                incr = self.seed.sample_increments(self.du, rng, size=n)
                out[r] = _ou_from_jumps(centers, incr, self.rate, times)
        return out[0] if squeeze else out


class OUVolProcess:
    """Purely temporal squared-volatility process sigma^2_t = stationary OU,
    for the null-spatial (LSS) simulator."""

    def __init__(self, seed: LevySeed, rate: float, du: float | None = None):
        self.ou = StationaryOU(seed, rate, du=du)

    def sample_sigma(self, times, rng):
        return np.sqrt(self.ou.sample(times, rng))

    @property
    def mean_sigma_sq(self):
        return self.ou.mean


# ---------------------------------------------------------------------------
# Squared-volatility field handles
# ---------------------------------------------------------------------------

class VolatilityFieldHandle:
    """Immutable spec of a nonnegative squared-volatility field sigma^2_t(x).

    ``simulate`` returns one realisation on the (ts, xs) lattice with shape
    (len(ts), len(xs)); analytic moments are exposed where the model admits
    them and return None otherwise.
    """

    deterministic = False

    def simulate(self, xs, ts, rng):
        raise NotImplementedError

    def mean_sigma_sq(self, x):
        return None

    def mean_sigma(self, x):
        return None


@dataclass(frozen=True)
class DeterministicVol(VolatilityFieldHandle):
    fn: object  # callable (x, t) -> sigma^2, vectorised

    deterministic = True

    def simulate(self, xs, ts, rng):
        xs = np.asarray(xs, dtype=float)
        ts = np.asarray(ts, dtype=float)
        vals = np.asarray(self.fn(xs[None, :], ts[:, None]), dtype=float)
        vals = np.broadcast_to(vals, (ts.size, xs.size)).copy()
        if np.any(vals < 0):
            raise ValueError("sigma^2 must be nonnegative")
        return vals

    def mean_sigma_sq(self, x):
        return float(self.fn(x, 0.0))

    def mean_sigma(self, x):
        return math.sqrt(self.mean_sigma_sq(x))


UNIT_VOL = DeterministicVol(fn=lambda x, t: np.ones_like(np.asarray(x) * np.asarray(t)))


def _transform(name):
    return {"square": lambda y: y ** 2,
            "exp": np.exp,
            "identity": lambda y: y}[name]


@dataclass(frozen=True)
class KernelSmoothedVol(VolatilityFieldHandle):
    """sigma^2_t(x) = V( integral j(x, xi, t-s) L^sigma(dxi, ds) ).

    ``j`` takes (x, xi, u) with u = t - s >= 0 and must vanish outside
    [x + support[0], x + support[1]] x [0, time_depth].  V is one of
    'square', 'exp', 'identity'; the identity requires a subordinator seed so
    the field stays nonnegative.
    """

    j: object
    V: str
    seed: LevySeed
    support: tuple
    time_depth: float
    dx: float = 0.05
    dt: float = 0.05

    def __post_init__(self):
        if self.V not in ("square", "exp", "identity"):
            raise ValueError("V must be one of square, exp, identity")
        if self.V == "identity" and not self.seed.is_subordinator:
            raise ValueError("identity transform needs a subordinator seed "
                             "(signed bases break positivity)")

    def _lattice(self, xs, ts):
        x_lo = xs.min() + self.support[0]
        x_hi = xs.max() + self.support[1]
        s_lo, s_hi = ts.min() - self.time_depth, ts.max()
        nx = max(1, int(np.ceil((x_hi - x_lo) / self.dx)))
        ns = max(1, int(np.ceil((s_hi - s_lo) / self.dt)))
        xi = x_lo + (np.arange(nx) + 0.5) * self.dx
        sc = s_lo + (np.arange(ns) + 0.5) * self.dt
        return xi, sc

    def simulate(self, xs, ts, rng):
        xs = np.asarray(xs, dtype=float)
        ts = np.asarray(ts, dtype=float)
        xi, sc = self._lattice(xs, ts)
        vol = self.dx * self.dt
        draws = self.seed.sample_increments(vol, rng, size=(sc.size, xi.size))
        out = np.empty((ts.size, xs.size))
        transform = _transform(self.V)
        for i, t in enumerate(ts):
            u = t - sc
            active = u >= 0.0
            for k, x in enumerate(xs):
                w = np.zeros((sc.size, xi.size))
                w[active] = self.j(x, xi[None, :], u[active, None])
                out[i, k] = transform(float(np.sum(w * draws)))
        return out

    def smoothed_moments(self, x, t=0.0):
        """(integral j, integral j^2) at the handle's own resolution."""
        xi, sc = self._lattice(np.array([x]), np.array([t]))
        u = t - sc
        w = np.zeros((sc.size, xi.size))
        active = u >= 0.0
        w[active] = self.j(x, xi[None, :], u[active, None])
        vol = self.dx * self.dt
        return float(w.sum() * vol), float((w ** 2).sum() * vol)

    def mean_sigma_sq(self, x):
        ij, ij2 = self.smoothed_moments(x)
        k1, k2 = self.seed.mean, self.seed.variance
        if self.V == "identity":
            return k1 * ij
        if self.V == "square":
            return k2 * ij2 + (k1 * ij) ** 2
        return None


def tempo_spatial_trawl_vol(trawl: geo.TrawlSet, V: str, seed: LevySeed,
                            dx: float = 0.05, dt: float = 0.05,
                            eps_tail: float = 1e-4) -> KernelSmoothedVol:
    """Indicator-kernel smoothing: sigma^2 = V(L^sigma(A_t(x))), a
    tempo-spatial trawl field."""

    def j(x, xi, u):
        rel = np.asarray(xi) - x
        return ((rel >= 0.0) & (rel <= trawl.depth(np.asarray(u)))).astype(float)

    return KernelSmoothedVol(j=j, V=V, seed=seed,
                             support=(0.0, float(trawl.depth(0.0))),
                             time_depth=trawl.tail_time(eps_tail), dx=dx, dt=dt)


@dataclass(frozen=True)
class OUTVF(VolatilityFieldHandle):
    """Ornstein-Uhlenbeck-type volatility field.

    tau_t(x) = e^{-mu x} Ytilde_t + sum over slabs below x of
    e^{-mu (x - xi_j)} * (slab OU component at t), with Ytilde a stationary
    OU(lam) subordinator-driven process and slab components OU(kappa)
    processes whose drivers are thinned by the slab width.
    """

    lam: float
    mu: float
    kappa: float
    y_seed: LevySeed
    x_seed: LevySeed
    slab_dx: float = 0.02

    def __post_init__(self):
        for name in ("lam", "mu", "kappa"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for s in (self.y_seed, self.x_seed):
            if not s.is_subordinator:
                raise ValueError("OUTVF drivers must be subordinator seeds")

    @property
    def var_y1(self):
        """Variance of the temporal driver Levy process at time 1."""
        return self.y_seed.variance

    @property
    def var_x0(self):
        """Stationary variance of the spatial generator Xtilde."""
        return self.x_seed.variance / (2 * self.kappa)

    def _slabs(self, x_max):
        n = max(0, int(np.ceil(x_max / self.slab_dx - 1e-12)))
        return self.slab_dx * np.arange(n), self.slab_dx

    def simulate(self, xs, ts, rng):
        xs = np.asarray(xs, dtype=float)
        ts = np.asarray(ts, dtype=float)
        if np.any(xs < 0):
            raise ValueError("OUTVF is defined for x >= 0")
        ytilde = StationaryOU(self.y_seed, self.lam).sample(ts, rng)
        out = np.exp(-self.mu * xs)[None, :] * ytilde[:, None]
        slab_lo, dx = self._slabs(xs.max())
        if slab_lo.size == 0:
            return out
        m = slab_lo.size
        t0 = ts.min() - OU_WARMUP_EFOLDS / self.kappa
        span = ts.max() - t0
        if _is_finite_activity(self.x_seed.levy_measure):
            # one pooled jump draw over all slabs, allocated uniformly
            jt, mk = _cp_jumps(thinned(self.x_seed.levy_measure, dx * m), span, t0, rng)
            slab_of = rng.integers(0, m, jt.size)
            dtm = ts[:, None] - jt[None, :]
            w = np.where(dtm >= 0.0, np.exp(-self.kappa * np.maximum(dtm, 0.0)), 0.0) * mk
            comp = np.zeros((ts.size, m))
            for i in range(ts.size):
                comp[i] = np.bincount(slab_of, weights=w[i], minlength=m)
            if self.x_seed.a:
                comp += self.x_seed.a * dx / self.kappa
        else:
            # grid increments carry the drift through sample_increments already
            du = 0.02 / self.kappa
            n = int(np.ceil(span / du))
            centers = t0 + (np.arange(n) + 0.5) * du
            incr = self.x_seed.sample_increments(du * dx, rng, size=(n, m))
            dtm = ts[:, None] - centers[None, :]
            wexp = np.where(dtm >= 0.0, np.exp(-self.kappa * np.maximum(dtm, 0.0)), 0.0)
            comp = wexp @ incr
        # left-endpoint sum over slabs fully below each x
        for k, x in enumerate(xs):
            take = slab_lo + dx <= x + 1e-12
            if take.any():
                coeff = np.exp(-self.mu * (x - slab_lo[take]))
                out[:, k] += comp[:, take] @ coeff
        return out

    def mean_sigma_sq(self, x):
        ey = self.y_seed.mean / self.lam
        ex = self.x_seed.mean / self.kappa
        slab_lo, dx = self._slabs(float(x))
        take = slab_lo + dx <= x + 1e-12
        spatial = float(np.sum(np.exp(-self.mu * (x - slab_lo[take])))) * dx if take.any() else 0.0
        return math.exp(-self.mu * x) * ey + ex * spatial

    def cov_tau(self, t, x, t2, x2):
        """Continuum covariance of tau between (x, t) and (x2, t2)."""
        dt_, sx = abs(t - t2), x + x2
        dx_ = abs(x - x2)
        term1 = self.var_y1 / self.lam * math.exp(-self.lam * dt_ - self.mu * sx)
        term2 = self.var_x0 / self.mu * math.exp(-self.kappa * dt_ - self.mu * dx_)
        term3 = self.var_x0 / self.mu * math.exp(-self.kappa * dt_ - self.mu * sx)
        return 0.5 * (term1 + term2 - term3)

    def cor_tau(self, t, x, t2, x2):
        v1 = self.cov_tau(t, x, t, x)
        v2 = self.cov_tau(t2, x2, t2, x2)
        return self.cov_tau(t, x, t2, x2) / math.sqrt(v1 * v2)


@dataclass(frozen=True)
class FrozenVol(VolatilityFieldHandle):
    """Replays one fixed sigma^2 lattice; for conditional-law oracles."""

    values: np.ndarray  # (n_t, n_x) on the lattice the consumer will request

    deterministic = True

    def simulate(self, xs, ts, rng):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(ts), len(xs)):
            raise ValueError("frozen field shape does not match requested lattice")
        return vals


# ---------------------------------------------------------------------------
# Extended subordination
# ---------------------------------------------------------------------------

@dataclass
class SubordinatedSample:
    values: np.ndarray     # (n_replicates,)
    t_total: np.ndarray    # per-replicate T(A), the image volume of the region


def subordinate(seed: LevySeed, tau, region: geo.Rect, dx: float, dt: float,
                master_seed: int, n_replicates: int = 1) -> SubordinatedSample:
    """Samples of L(A meta-wedge T) for T(A) = integral_A tau.

    Per cell the conditional increment law has cumulant
    tau(cell) * cellvolume * C(zeta ddagger L'), realised by feeding the cell
    meta-volume into the seed's volume-parametrised sampler.  ``tau`` may be a
    constant, a deterministic density (x, t) -> value, or a
    VolatilityFieldHandle drawn fresh per replicate.
    """
    nx = max(1, int(np.ceil((region.x_hi - region.x_lo) / dx)))
    nt = max(1, int(np.ceil((region.t_hi - region.t_lo) / dt)))
    xs = region.x_lo + (np.arange(nx) + 0.5) * dx
    ts = region.t_lo + (np.arange(nt) + 0.5) * dt
    cellvol = (region.x_hi - region.x_lo) / nx * (region.t_hi - region.t_lo) / nt
    values = np.empty(n_replicates)
    t_total = np.empty(n_replicates)
    static_field = None
    if not isinstance(tau, VolatilityFieldHandle):
        fn = tau if callable(tau) else (lambda x, t, c=float(tau): np.full(np.broadcast(x, t).shape, c))
        static_field = np.asarray(fn(xs[None, :], ts[:, None]), dtype=float)
        static_field = np.broadcast_to(static_field, (nt, nx))
    for r in range(n_replicates):
        rng = substream(master_seed, r)
        field_vals = static_field if static_field is not None else tau.simulate(xs, ts, rng)
        if np.any(field_vals < 0):
            raise ValueError("meta-time density tau must be nonnegative")
        t_cells = field_vals * cellvol
        t_total[r] = t_cells.sum()
        values[r] = seed.sample_increments(t_cells.ravel(), rng).sum()
    return SubordinatedSample(values=values, t_total=t_total)


@dataclass
class TabulatedMeasure:
    """Discrete atoms (x_k, mass_k) or a density on a grid."""

    xs: np.ndarray
    weights: np.ndarray
    discrete: bool = True

    @classmethod
    def from_density(cls, xs, density_values):
        xs = np.asarray(xs, dtype=float)
        dens = np.asarray(density_values, dtype=float)
        return cls(xs=xs, weights=dens, discrete=False)

    def atoms(self):
        """(points, masses); densities are collapsed by trapezoid weights."""
        if self.discrete:
            return self.xs, self.weights
        w = np.zeros_like(self.xs)
        dxs = np.diff(self.xs)
        w[:-1] += 0.5 * dxs
        w[1:] += 0.5 * dxs
        return self.xs, self.weights * w


def subordinated_levy_measure(seed: LevySeed, nu_t: TabulatedMeasure,
                              x_grid) -> TabulatedMeasure:
    """Levy measure of the subordinated basis:
    nutilde(dx) = integral P(L'_y in dx) nu_T(dy).

    Supported seeds: pure drift (identity), Poisson atom (discrete output on
    the integer grid, zero excluded), gamma and inverse Gaussian (density
    output on ``x_grid``).
    """
    ys, ws = nu_t.atoms()
    m = seed.levy_measure
    if isinstance(m, NoJumps) and seed.b == 0:
        return TabulatedMeasure(xs=seed.a * ys, weights=ws, discrete=True)
    if isinstance(m, PoissonAtom):
        ks = np.asarray(x_grid, dtype=int)
        if np.any(ks < 1):
            raise ValueError("Poisson subordination masses live on k >= 1")
        pmf = np.zeros(ks.size)
        for y, w in zip(ys, ws):
            pmf += w * stats.poisson.pmf(ks, m.intensity * y)
        return TabulatedMeasure(xs=ks.astype(float), weights=pmf, discrete=True)
    xg = np.asarray(x_grid, dtype=float)
    if isinstance(m, GammaJumps):
        dens = np.zeros(xg.size)
        for y, w in zip(ys, ws):
            dens += w * stats.gamma.pdf(xg, a=y, scale=1.0 / m.alpha)
        return TabulatedMeasure.from_density(xg, dens)
    if isinstance(m, InverseGaussianJumps):
        dens = np.zeros(xg.size)
        for y, w in zip(ys, ws):
            d = m.delta * y
            dens += w * stats.invgauss.pdf(xg, mu=1.0 / (d * m.gamma), scale=d ** 2)
        return TabulatedMeasure.from_density(xg, dens)
    raise ValueError("transition density unavailable; supported seeds: "
                     "pure drift, Poisson, gamma, inverse Gaussian")


# ---------------------------------------------------------------------------
# Levy mixing and probability mixing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixingSpec:
    """A parametric Levy measure family nu(dx; theta) with a mixing measure.

    ``family`` maps theta to a LevyMeasureSpec.  ``gamma_atoms`` is a discrete
    mixing measure [(theta, weight)]; ``gamma_density`` a tabulated density
    (theta_grid, values) used for cumulant-level mixing only.
    """

    family: object
    gamma_atoms: tuple = ()
    gamma_density: tuple = ()
    mode: str = "levy_mix"

    def components(self):
        if self.gamma_atoms:
            return [(float(w), self.family(th)) for th, w in self.gamma_atoms]
        thetas, dens = self.gamma_density
        thetas = np.asarray(thetas, dtype=float)
        dens = np.asarray(dens, dtype=float)
        w = np.zeros_like(thetas)
        d = np.diff(thetas)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        return [(float(wk * dk), self.family(th))
                for th, wk, dk in zip(thetas, w, dens)]


def check_mix_admissibility(mix: MixingSpec) -> float:
    """integral (1 ^ x^2) d(nutilde); raises AdmissibilityError on divergence.

    For tabulated densities a power-law fit near the lower endpoint of the
    theta grid detects non-integrable growth of the integrand.
    """
    if mix.gamma_atoms:
        total = sum(w * mix.family(th).integrability_mass()
                    for th, w in mix.gamma_atoms)
        if not np.isfinite(total):
            raise AdmissibilityError(f"mixing admissibility integral diverges ({total})")
        return float(total)
    thetas, dens = mix.gamma_density
    thetas = np.asarray(thetas, dtype=float)
    dens = np.asarray(dens, dtype=float)
    integrand = np.array([mix.family(th).integrability_mass() for th in thetas]) * dens
    head = integrand[:4]
    # endpoint diagnosis only when the grid reaches toward theta = 0; a
    # bounded-away-from-zero support is integrable on its own domain
    reaches_zero = thetas[0] < 1e-2 * thetas[-1]
    if reaches_zero and np.all(head > 0):
        slope = np.polyfit(np.log(thetas[:4]), np.log(head), 1)[0]
        if slope <= -1.0:
            est = float(np.trapezoid(integrand, thetas))
            raise AdmissibilityError(
                f"mixing admissibility integral diverges near theta={thetas[0]:.3g} "
                f"(local exponent {slope:.2f}, partial integral {est:.3g})")
    return float(np.trapezoid(integrand, thetas))


def levy_mix(mix: MixingSpec) -> LevySeed:
    """Seed whose Levy measure is the gamma-mixture of the family."""
    check_mix_admissibility(mix)
    mixed = Mixed(tuple(mix.components()))
    return LevySeed(CharacteristicQuadruplet(levy_measure=mixed))


def poisson_intensity_family(theta):
    return PoissonAtom(theta)


@dataclass(frozen=True)
class OUMixedFamily:
    """nu(dx; theta) of the stationary OU law driven by ``driver_measure``:
    density nu_bar(x) / (theta x) with nu_bar the driver tail mass."""

    driver_measure: LevyMeasureSpec

    def __call__(self, theta):
        return OUStationaryMeasure(self.driver_measure, theta)


@dataclass(frozen=True)
class OUStationaryMeasure(LevyMeasureSpec):
    driver: LevyMeasureSpec
    theta: float
    is_subordinator = True

    def density(self, x):
        x = np.asarray(x, dtype=float)
        tail = np.vectorize(self.driver.tail_mass)(x)
        return tail / (self.theta * x)

    def moment(self, i):
        # E of stationary OU jumps: integral x^i nu = driver moment / (i theta)
        return self.driver.moment(i) / (i * self.theta)

    def jump_cumulant(self, zeta):
        z = complex(zeta)

        def inner(u):
            return self.driver.jump_cumulant(z * math.exp(-self.theta * u))

        re, _ = integrate.quad(lambda u: inner(u).real, 0, np.inf, limit=200)
        im, _ = integrate.quad(lambda u: inner(u).imag, 0, np.inf, limit=200)
        return re + 1j * im

    def integrability_mass(self):
        val, _ = integrate.quad(
            lambda x: min(1.0, x * x) * float(self.density(x)), 0, np.inf, limit=200)
        return val

    def min1_sq(self, u):
        val, _ = integrate.quad(
            lambda x: min(1.0, (x * u) ** 2) * float(self.density(x)), 0, np.inf, limit=200)
        return val


# ---------------------------------------------------------------------------
# supOU
# ---------------------------------------------------------------------------

def simulate_supou(driver_seed: LevySeed, gamma_atoms, times, master_seed: int,
                   n_replicates: int = 1) -> np.ndarray:
    """Superposition of independent OU processes, one per mixing atom, with
    the driver intensity thinned by the atom weight; shape (R, len(times))."""
    times = np.asarray(times, dtype=float)
    if not driver_seed.is_subordinator:
        raise ValueError("supOU driver must be a subordinator seed")
    out = np.zeros((n_replicates, times.size))
    for r in range(n_replicates):
        rng = substream(master_seed, r)
        for theta, w in gamma_atoms:
            comp_seed = LevySeed(CharacteristicQuadruplet(
                levy_measure=thinned(driver_seed.levy_measure, w)))
            out[r] += StationaryOU(comp_seed, theta).sample(times, rng)
    return out


def supou_acf(driver_seed: LevySeed, gamma_atoms, h) -> float:
    """Stationary ACF of the supOU superposition: per-atom OU variances scale
    with 1/theta, so the mixture ACF weights e^{-theta h} by w/theta."""
    num = sum(w / theta * np.exp(-theta * np.abs(h)) for theta, w in gamma_atoms)
    den = sum(w / theta for theta, w in gamma_atoms)
    return num / den


def supou_variance(driver_seed: LevySeed, gamma_atoms) -> float:
    return driver_seed.variance / 2.0 * sum(w / theta for theta, w in gamma_atoms)


def supou_cumulant(driver_seed: LevySeed, gamma_atoms, zeta) -> complex:
    """C(zeta ddagger supOU) = sum_k w_k integral_0^inf C_L(zeta e^{-theta_k u}) du,
    the per-atom quadrature route."""
    measure = driver_seed.levy_measure
    total = 0.0 + 0.0j
    for theta, w in gamma_atoms:
        def inner(u):
            return measure.jump_cumulant(zeta * math.exp(-theta * u))

        re, _ = integrate.quad(lambda u: complex(inner(u)).real, 0, np.inf, limit=200)
        im, _ = integrate.quad(lambda u: complex(inner(u)).imag, 0, np.inf, limit=200)
        total += w * (re + 1j * im)
    return total


def supou_cumulant_tabulated(driver_seed: LevySeed, gamma_atoms, zeta,
                             x_max: float = np.inf) -> complex:
    """Dual route: integral (e^{i zeta x} - 1) nutilde(dx) for the mixed
    measure density sum_k w_k nu_bar(x) / (theta_k x)."""
    measure = driver_seed.levy_measure

    def density(x):
        return sum(w * measure.tail_mass(x) / (theta * x) for theta, w in gamma_atoms)

    re, _ = integrate.quad(lambda x: (math.cos(zeta * x) - 1) * density(x),
                           0, x_max, limit=400)
    im, _ = integrate.quad(lambda x: math.sin(zeta * x) * density(x),
                           0, x_max, limit=400)
    return re + 1j * im


# ---------------------------------------------------------------------------
# Probability mixing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbabilityMix:
    """Normal variance-mean mixture: sigma^2 ~ gamma_law once per replicate,
    seed = N(mu + beta sigma^2, sigma^2).

    Unlike Levy mixing this does not generally preserve infinite
    divisibility; it randomises the seed law itself.
    """

    mu: float = 0.0
    beta: float = 0.0
    gamma_atoms: tuple = ()           # discrete [(sigma2, weight)]
    ig_params: tuple = ()             # (delta, gamma) of an IG mixing law

    def draw_sigma_sq(self, rng, size=None):
        if self.gamma_atoms:
            vals = np.array([v for v, _ in self.gamma_atoms])
            probs = np.array([w for _, w in self.gamma_atoms], dtype=float)
            probs = probs / probs.sum()
            return rng.choice(vals, p=probs, size=size)
        d, g = self.ig_params
        return stats.invgauss.rvs(mu=1.0 / (d * g), scale=d ** 2,
                                  size=size, random_state=rng)

    def draw_seed(self, rng) -> LevySeed:
        s2 = float(self.draw_sigma_sq(rng))
        return LevySeed(CharacteristicQuadruplet(a=self.mu + self.beta * s2, b=s2))

    def sample_marginal(self, rng, n):
        s2 = self.draw_sigma_sq(rng, size=n)
        return rng.normal(self.mu + self.beta * s2, np.sqrt(s2))

    def laplace_gamma(self, s):
        """E exp(-s sigma^2) of the mixing law."""
        if self.gamma_atoms:
            tot = sum(w for _, w in self.gamma_atoms)
            return sum(w / tot * np.exp(-s * v) for v, w in self.gamma_atoms)
        d, g = self.ig_params
        return np.exp(d * g * (1.0 - np.sqrt(1.0 + 2.0 * s / g ** 2)))

    def marginal_cf(self, zeta):
        """CF of the mixed marginal; for IG mixing this is the (symmetric
        when beta=0) normal inverse Gaussian characteristic function."""
        z = np.asarray(zeta, dtype=complex)
        return np.exp(1j * z * self.mu) * self.laplace_gamma(0.5 * z ** 2 - 1j * z * self.beta)
