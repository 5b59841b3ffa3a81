"""Ambit fields: simulation, conditional cumulants, second-order structure,
integrability checking and the semimartingale decomposition.

The field

    Y_t(x) = mu + integral_{A_t(x)} h sigma dL + integral_{D_t(x)} q a dxi ds

is discretised on a space-time cell lattice.  One basis increment is drawn
per cell and shared by every evaluation point, so the overlap of ambit sets
drives the dependence structure exactly as in the continuum model.  The
volatility field is evaluated at each cell's earliest time (left point),
which preserves the predictability convention of the stochastic integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .levy_basis import LevySeed
from .rng import substream
from .trawl import DEFAULT_EPS_TAIL, model_digest
from .volatility import UNIT_VOL, VolatilityFieldHandle

__all__ = [
    "Kernel", "AmbitFieldSpec", "SimulationGrid", "SampleField", "FieldCells",
    "build_cells", "simulate_field", "conditional_cumulant", "second_order",
    "check_integrability", "semimartingale_decompose", "simulate_lss",
    "kernel_tail_time",
]


@dataclass(frozen=True)
class Kernel:
    """Deterministic kernel h.

    ``stationary`` kernels are called as fn(x - xi, t - s); general kernels
    as fn(x, t, xi, s).  ``dt_fn`` is the partial derivative in t with the
    same calling convention; ``time_free`` marks kernels with no t dependence
    at all (so the derivative vanishes identically).
    """

    fn: object
    stationary: bool = True
    time_free: bool = False
    dt_fn: object = None

    def __call__(self, x, t, xi, s):
        if self.stationary:
            return self.fn(np.asarray(x) - np.asarray(xi), np.asarray(t) - np.asarray(s))
        return self.fn(x, t, xi, s)

    def dt(self, x, t, xi, s):
        if self.time_free:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(t),
                                         np.asarray(xi), np.asarray(s)).shape)
        if self.dt_fn is None:
            raise ValueError("kernel does not supply a time derivative")
        if self.stationary:
            return self.dt_fn(np.asarray(x) - np.asarray(xi), np.asarray(t) - np.asarray(s))
        return self.dt_fn(x, t, xi, s)


CONSTANT_KERNEL = Kernel(fn=lambda ux, ut: np.ones(np.broadcast(ux, ut).shape),
                         time_free=True)


@dataclass(frozen=True)
class AmbitFieldSpec:
    """Level, kernel, ambit sets, volatility and basis seed of one model."""

    seed: LevySeed
    ambit: geo.AmbitSet
    kernel: Kernel = CONSTANT_KERNEL
    vol: VolatilityFieldHandle = UNIT_VOL
    mu: float = 0.0
    drift_kernel: Kernel = None
    drift_field: object = None          # callable (x, t) -> deterministic a
    drift_ambit: geo.AmbitSet = None    # defaults to the main ambit set

    @property
    def effective_drift_ambit(self):
        return self.drift_ambit if self.drift_ambit is not None else self.ambit


@dataclass(frozen=True)
class SimulationGrid:
    """Tempo-spatial lattice: evaluation points plus cell resolutions."""

    times: tuple
    xs: tuple
    dx: float
    dt: float
    eps_tail: float = DEFAULT_EPS_TAIL
    t_back: float = None

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "xs", tuple(float(x) for x in self.xs))
        if self.dx <= 0 or self.dt <= 0:
            raise ValueError("resolutions must be positive")


@dataclass
class SampleField:
    times: np.ndarray
    xs: np.ndarray
    values: np.ndarray   # (replicates, n_times, n_xs)
    master_seed: int
    model_hash: str
    grid_info: dict = field(default_factory=dict)
    vol_values: np.ndarray = None   # (replicates, n_s, n_x) lattice, on request


@dataclass
class FieldCells:
    """Cell lattice with per-evaluation-point kernel weights."""

    xi: np.ndarray          # lattice abscissae (n_x,)
    s_centers: np.ndarray   # lattice times (n_s,)
    s_left: np.ndarray      # cell left edges, where sigma is evaluated
    XI: np.ndarray          # flattened cell coordinates, s outer, x inner
    S: np.ndarray
    volume: float
    keep: np.ndarray        # bool over the full lattice
    weights: np.ndarray     # (n_kept, n_eval) kernel weights h * 1_A
    drift: np.ndarray       # (n_eval,) deterministic drift contribution
    eval_points: list       # [(t, x)] in output order, t outer


def _window(ambit: geo.AmbitSet, grid: SimulationGrid):
    lo, hi = ambit.spatial_extent()
    required = ambit.time_extent(grid.eps_tail)
    t_back = grid.t_back
    if t_back is None:
        t_back = required
    elif t_back < required:
        raise ValueError(
            f"window truncation budget exceeded: t_back={t_back} but the ambit "
            f"set needs {required:.6g} for eps_tail={grid.eps_tail}")
    x_lo = min(grid.xs) + lo
    x_hi = max(grid.xs) + hi
    s_lo = min(grid.times) - t_back
    s_hi = max(grid.times)
    return x_lo, x_hi, s_lo, s_hi


def build_cells(spec: AmbitFieldSpec, grid: SimulationGrid) -> FieldCells:
    x_lo, x_hi, s_lo, s_hi = _window(spec.ambit, grid)
    n_x = max(1, int(np.ceil((x_hi - x_lo) / grid.dx)))
    n_s = max(1, int(np.ceil((s_hi - s_lo) / grid.dt)))
    xi = x_lo + (np.arange(n_x) + 0.5) * grid.dx
    sc = s_lo + (np.arange(n_s) + 0.5) * grid.dt
    XI = np.tile(xi, n_s)
    S = np.repeat(sc, n_x)
    eval_points = [(t, x) for t in grid.times for x in grid.xs]
    masks = [spec.ambit.contains(XI, S, x=x, t=t) for t, x in eval_points]
    keep = np.logical_or.reduce(masks) if masks else np.zeros(XI.size, bool)
    XI_k, S_k = XI[keep], S[keep]
    weights = np.zeros((XI_k.size, len(eval_points)))
    for idx, ((t, x), mask) in enumerate(zip(eval_points, masks)):
        mk = mask[keep]
        if mk.any():
            weights[mk, idx] = spec.kernel(x, t, XI_k[mk], S_k[mk])
    drift = np.zeros(len(eval_points))
    if spec.drift_kernel is not None and spec.drift_field is not None:
        damb = spec.effective_drift_ambit
        for idx, (t, x) in enumerate(eval_points):
            mask = damb.contains(XI, S, x=x, t=t)
            if mask.any():
                q = spec.drift_kernel(x, t, XI[mask], S[mask])
                a = spec.drift_field(XI[mask], S[mask])
                drift[idx] = np.sum(q * a) * grid.dx * grid.dt
    return FieldCells(xi=xi, s_centers=sc, s_left=sc - grid.dt / 2, XI=XI_k,
                      S=S_k, volume=grid.dx * grid.dt, keep=keep,
                      weights=weights, drift=drift, eval_points=eval_points)


def _sigma_flat(spec: AmbitFieldSpec, cells: FieldCells, rng):
    sig2 = spec.vol.simulate(cells.xi, cells.s_left, rng)
    return np.sqrt(np.asarray(sig2, dtype=float)).ravel()[cells.keep]


def simulate_field(spec: AmbitFieldSpec, grid: SimulationGrid, master_seed: int,
                   n_replicates: int = 1, collect_vol: bool = False) -> SampleField:
    """Riemann-sum field simulation with shared basis per replicate.

    The volatility is drawn first from the replicate substream, then the
    basis increments; deterministic volatilities consume no randomness, which
    keeps the basis realisation identical to the plain trawl simulator on a
    matching grid.  With ``collect_vol`` the sigma^2 lattice of every
    replicate is retained on the output.
    """
    cells = build_cells(spec, grid)
    nt, nx = len(grid.times), len(grid.xs)
    values = np.empty((n_replicates, nt, nx))
    vol_values = (np.empty((n_replicates, cells.s_left.size, cells.xi.size))
                  if collect_vol else None)
    for r in range(n_replicates):
        rng = substream(master_seed, r)
        sig2 = np.asarray(spec.vol.simulate(cells.xi, cells.s_left, rng), dtype=float)
        if collect_vol:
            vol_values[r] = sig2
        sigma = np.sqrt(sig2).ravel()[cells.keep]
        d_l = spec.seed.sample_increments(cells.volume, rng, size=cells.XI.size)
        flat = (d_l * sigma) @ cells.weights + spec.mu + cells.drift
        values[r] = flat.reshape(nt, nx)
    return SampleField(times=np.asarray(grid.times), xs=np.asarray(grid.xs),
                       values=values, master_seed=master_seed,
                       model_hash=model_digest(spec),
                       grid_info={"dx": grid.dx, "dt": grid.dt,
                                  "eps_tail": grid.eps_tail,
                                  "n_cells": int(cells.XI.size)},
                       vol_values=vol_values)


def conditional_cumulant(spec: AmbitFieldSpec, frozen_sigma, zeta, x: float,
                         t: float, grid: SimulationGrid) -> complex:
    """C^sigma(zeta) = sum over cells in A_t(x) of C(zeta h sigma ddagger L')
    times the cell volume, for a volatility field frozen on the lattice.

    On a matching grid this is the exact conditional log-CF of the
    discretised simulation output.
    """
    cells = build_cells(spec, grid)
    sig = np.sqrt(np.asarray(frozen_sigma, dtype=float)).ravel()[cells.keep]
    mask = spec.ambit.contains(cells.XI, cells.S, x=x, t=t)
    if not mask.any():
        return 0.0 + 0.0j
    h = spec.kernel(x, t, cells.XI[mask], cells.S[mask])
    vals = spec.seed.cumulant(zeta * h * sig[mask])
    return complex(np.sum(vals) * cells.volume)


# ---------------------------------------------------------------------------
# Second-order structure
# ---------------------------------------------------------------------------

@dataclass
class SecondOrder:
    """Mean/variance/covariance evaluator per the moment formulas.

    For stochastic volatility handles the sigma moments (E sigma, E sigma^2)
    and the sigma-covariance term are Monte-Carlo estimated on the lattice;
    reported values carry a standard error (0 for deterministic volatility).
    """

    spec: AmbitFieldSpec
    grid: SimulationGrid
    cells: FieldCells
    e_sig: np.ndarray       # per kept cell
    e_sig2: np.ndarray
    sigma_draws: np.ndarray  # (n_mc, n_kept) or empty for deterministic vol

    def _mask_h(self, x, t):
        mask = self.spec.ambit.contains(self.cells.XI, self.cells.S, x=x, t=t)
        h = np.zeros(self.cells.XI.size)
        if mask.any():
            h[mask] = self.spec.kernel(x, t, self.cells.XI[mask], self.cells.S[mask])
        return mask, h

    def mean(self, x, t):
        _, h = self._mask_h(x, t)
        val = float(np.sum(h * self.e_sig) * self.cells.volume * self.spec.seed.mean
                    + self.spec.mu)
        return val

    def covariance(self, x, t, x2, t2):
        """(value, standard error) of Cov(Y_t(x), Y_t2(x2))."""
        m1, h1 = self._mask_h(x, t)
        m2, h2 = self._mask_h(x2, t2)
        var_l = self.spec.seed.variance
        e_l = self.spec.seed.mean
        vol = self.cells.volume
        if self.sigma_draws.size == 0:
            term1 = float(np.sum(h1 * h2 * self.e_sig2) * var_l * vol)
            return term1, 0.0
        # per-replicate overlap term and weighted sums for the rho term
        t1_r = (self.sigma_draws ** 2) @ (h1 * h2) * var_l * vol
        s1 = self.sigma_draws @ h1 * vol
        s2 = self.sigma_draws @ h2 * vol
        n = len(t1_r)
        term1 = float(np.mean(t1_r))
        se1 = float(np.std(t1_r, ddof=1) / np.sqrt(n))
        d1, d2 = s1 - s1.mean(), s2 - s2.mean()
        cov12 = float(np.sum(d1 * d2) / (n - 1))
        se2 = float(np.sqrt(max(np.mean((d1 * d2) ** 2) - np.mean(d1 * d2) ** 2, 0.0) / n))
        return term1 + e_l ** 2 * cov12, float(np.hypot(se1, abs(e_l) ** 2 * se2))

    def variance(self, x, t):
        return self.covariance(x, t, x, t)

    def conditional_mean(self, sigma_flat, x, t):
        _, h = self._mask_h(x, t)
        return float(np.sum(h * sigma_flat) * self.cells.volume * self.spec.seed.mean
                     + self.spec.mu)

    def conditional_covariance(self, sigma_flat, x, t, x2, t2):
        _, h1 = self._mask_h(x, t)
        _, h2 = self._mask_h(x2, t2)
        return float(np.sum(h1 * h2 * sigma_flat ** 2)
                     * self.spec.seed.variance * self.cells.volume)


def second_order(spec: AmbitFieldSpec, grid: SimulationGrid,
                 vol_mc: int = 0, master_seed: int = 0) -> SecondOrder:
    cells = build_cells(spec, grid)
    if spec.vol.deterministic:
        sig2 = np.asarray(spec.vol.simulate(cells.xi, cells.s_left, None),
                          dtype=float).ravel()[cells.keep]
        return SecondOrder(spec=spec, grid=grid, cells=cells,
                           e_sig=np.sqrt(sig2), e_sig2=sig2,
                           sigma_draws=np.empty((0, 0)))
    if vol_mc < 2:
        raise ValueError("stochastic volatility needs vol_mc >= 2 replicates "
                         "for Monte-Carlo sigma moments")
    draws = np.empty((vol_mc, int(cells.XI.size)))
    for r in range(vol_mc):
        rng = substream(master_seed, r)
        draws[r] = _sigma_flat(spec, cells, rng)
    return SecondOrder(spec=spec, grid=grid, cells=cells,
                       e_sig=draws.mean(axis=0), e_sig2=(draws ** 2).mean(axis=0),
                       sigma_draws=draws)


# ---------------------------------------------------------------------------
# Rajput-Rosinski integrability report
# ---------------------------------------------------------------------------

@dataclass
class IntegrabilityReport:
    drift_integral: float      # integral |V1(f)| c
    gaussian_integral: float   # integral f^2 b c
    jump_integral: float       # integral V2(f) c
    verdicts: dict             # name -> "finite" | "divergent"
    dominant_region: tuple     # (xi, s) of the dominant cell when divergent
    coarse_values: dict

    @property
    def all_finite(self):
        return all(v == "finite" for v in self.verdicts.values())

    def to_dict(self):
        return {
            "schema_version": 1,
            "drift_integral": self.drift_integral,
            "gaussian_integral": self.gaussian_integral,
            "jump_integral": self.jump_integral,
            "verdicts": dict(self.verdicts),
            "dominant_region": list(self.dominant_region),
        }


def _rr_integrals(spec: AmbitFieldSpec, x0, t0, dx, dt, grid: SimulationGrid):
    sub = SimulationGrid(times=(t0,), xs=(x0,), dx=dx, dt=dt,
                         eps_tail=grid.eps_tail, t_back=grid.t_back)
    cells = build_cells(spec, sub)
    f = cells.weights[:, 0]
    seed = spec.seed
    measure = seed.levy_measure
    vol = cells.volume
    v1 = np.zeros(f.size)
    v2 = np.zeros(f.size)
    if measure.moment(2) == 0.0:  # jump-free basis: V1 = u a, V2 = 0
        v1 = f * seed.a
    else:
        for i in np.flatnonzero(f != 0.0):
            u = float(f[i])
            v1[i] = u * (seed.a + measure.truncated_mean(1.0 / abs(u)))
            v2[i] = measure.min1_sq(u)
    parts = {
        "drift": np.abs(v1) * vol,
        "gaussian": f ** 2 * seed.b * vol,
        "jump": v2 * vol,
    }
    totals = {k: float(v.sum()) for k, v in parts.items()}
    dom_idx = int(np.argmax(sum(parts.values()))) if f.size else 0
    dom = (float(cells.XI[dom_idx]), float(cells.S[dom_idx])) if f.size else (0.0, 0.0)
    return totals, dom


def check_integrability(spec: AmbitFieldSpec, grid: SimulationGrid,
                        stability_rtol: float = 0.05) -> IntegrabilityReport:
    """Evaluates the three integrability conditions for the deterministic
    section f = 1_A h (volatility frozen at 1) at the first evaluation point.

    The integrals are midpoint Riemann sums at the grid resolution and at a
    2x refinement; a condition is reported divergent when refinement moves
    its value by more than ``stability_rtol`` relatively.  Divergence is a
    report outcome, never an exception.
    """
    x0, t0 = grid.xs[0], grid.times[0]
    coarse, _ = _rr_integrals(spec, x0, t0, grid.dx, grid.dt, grid)
    fine, dom = _rr_integrals(spec, x0, t0, grid.dx / 2, grid.dt / 2, grid)
    verdicts = {}
    for k in ("drift", "gaussian", "jump"):
        scale = max(abs(fine[k]), 1e-12)
        verdicts[k] = "finite" if abs(fine[k] - coarse[k]) <= stability_rtol * scale \
            else "divergent"
    return IntegrabilityReport(drift_integral=fine["drift"],
                               gaussian_integral=fine["gaussian"],
                               jump_integral=fine["jump"], verdicts=verdicts,
                               dominant_region=dom, coarse_values=coarse)


# ---------------------------------------------------------------------------
# Semimartingale decomposition
# ---------------------------------------------------------------------------

def semimartingale_decompose(kernel: Kernel, seed: LevySeed, x_interval,
                             T: float, dt: float, dx: float, master_seed: int,
                             n_replicates: int = 1,
                             vol: VolatilityFieldHandle = UNIT_VOL):
    """Simulates the three paths of the decomposition on one shared basis.

    The ambit set factorises as [0, t] x A(x) with A(x) the given spatial
    interval; the kernel must be stationary in time with a supplied
    derivative (or time free).  Returns a dict with the evaluation times and
    (replicates, n_times) arrays ``lhs``, ``martingale`` and ``fv``.
    """
    if not kernel.stationary:
        raise ValueError("decomposition requires a time-stationary kernel")
    if not kernel.time_free and kernel.dt_fn is None:
        raise ValueError("kernel does not supply a time derivative")
    x_lo, x_hi = x_interval
    n_x = max(1, int(np.ceil((x_hi - x_lo) / dx)))
    n_s = max(1, int(np.ceil(T / dt)))
    xi = x_lo + (np.arange(n_x) + 0.5) * dx
    sc = (np.arange(n_s) + 0.5) * dt
    times = dt * np.arange(1, n_s + 1)
    k0 = float(kernel(0.0, 0.0, 0.0, 0.0))
    K = np.where(times[:, None] >= sc[None, :],
                 kernel.fn(0.0, np.maximum(times[:, None] - sc[None, :], 0.0)), 0.0)
    if kernel.time_free:
        Kp = np.zeros_like(K)
    else:
        Kp = np.where(times[:, None] >= sc[None, :],
                      kernel.dt_fn(0.0, np.maximum(times[:, None] - sc[None, :], 0.0)),
                      0.0)
    vol_cell = dx * dt
    lhs = np.empty((n_replicates, n_s))
    mart = np.empty((n_replicates, n_s))
    fv = np.empty((n_replicates, n_s))
    for r in range(n_replicates):
        rng = substream(master_seed, r)
        sig = np.sqrt(np.asarray(vol.simulate(xi, sc - dt / 2, rng), dtype=float))
        d_l = seed.sample_increments(vol_cell, rng, size=(n_s, n_x))
        d_m = (sig * d_l).sum(axis=1)          # spatially aggregated increments
        lhs[r] = K @ d_m
        mart[r] = k0 * np.cumsum(d_m)
        fv[r] = dt * np.cumsum(Kp @ d_m)
    return {"times": times, "lhs": lhs, "martingale": mart, "fv": fv}


# ---------------------------------------------------------------------------
# Null-spatial case: Levy semistationary processes
# ---------------------------------------------------------------------------

def kernel_tail_time(k, eps: float, t_max: float = 1e6) -> float:
    """Smallest T (by doubling search) with integral_T^inf k^2 below
    eps times the total."""
    T = 1.0
    grid = None
    while T <= t_max:
        us = np.linspace(0, T, 4097)
        k2 = np.asarray(k(us), dtype=float) ** 2
        total = np.trapezoid(k2, us)
        tail_start = np.searchsorted(us, T / 2)
        tail = np.trapezoid(k2[tail_start:], us[tail_start:])
        if total > 0 and tail <= eps * total:
            # refine within [T/2, T]
            for cand in np.linspace(T / 2, T, 65):
                idx = np.searchsorted(us, cand)
                if np.trapezoid(k2[idx:], us[idx:]) <= eps * total:
                    return float(cand)
            return float(T)
        T *= 2
    raise ValueError("kernel tail does not decay; supply t_back explicitly")


def simulate_lss(k, times, dt: float, seed: LevySeed, master_seed: int,
                 n_replicates: int = 1, mu: float = 0.0, vol_process=None,
                 drift_kernel=None, drift_fn=None,
                 eps_tail: float = DEFAULT_EPS_TAIL, t_back: float = None):
    """Levy semistationary process
    Y_t = mu + integral_{-inf}^t k(t-s) sigma_{s-} dL_s
            + integral_{-inf}^t q(t-s) a_s ds.

    ``vol_process`` is None (sigma = 1), a deterministic callable t -> sigma,
    or an object with sample_sigma(times, rng) such as OUVolProcess; sigma is
    evaluated at each cell's left endpoint.  Returns a SampleField-free
    (replicates, n_times) array wrapped with its times.
    """
    times = np.asarray(times, dtype=float)
    if t_back is None:
        t_back = kernel_tail_time(k, eps_tail)
    s_lo = times.min() - t_back
    n_s = int(np.ceil((times.max() - s_lo) / dt))
    sc = s_lo + (np.arange(n_s) + 0.5) * dt
    s_left = sc - dt / 2
    W = np.where(times[:, None] >= sc[None, :],
                 np.asarray(k(np.maximum(times[:, None] - sc[None, :], 0.0)),
                            dtype=float), 0.0)
    drift_vec = np.zeros(times.size)
    if drift_kernel is not None and drift_fn is not None:
        Q = np.where(times[:, None] >= sc[None, :],
                     np.asarray(drift_kernel(np.maximum(times[:, None] - sc[None, :], 0.0)),
                                dtype=float), 0.0)
        drift_vec = Q @ np.asarray(drift_fn(sc), dtype=float) * dt
    values = np.empty((n_replicates, times.size))
    for r in range(n_replicates):
        rng = substream(master_seed, r)
        if vol_process is None:
            sig = np.ones(n_s)
        elif callable(vol_process):
            sig = np.asarray(vol_process(s_left), dtype=float)
        else:
            sig = np.asarray(vol_process.sample_sigma(s_left, rng), dtype=float)
        d_l = seed.sample_increments(dt, rng, size=n_s)
        values[r] = W @ (sig * d_l) + mu + drift_vec
    return {"times": times, "values": values}
