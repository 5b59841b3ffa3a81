"""Ambit sets, trawls and meta-times: the Lebesgue bookkeeping layer.

Everything the closed-form moment formulas need from the geometry reduces to
a handful of measures: the trawl size ``Leb(A)``, the overlap ``Leb(A ∩ A_h)``
and the increment sets ``Leb(A_h \\ A_0)``.  Trawls are represented by a
monotone nonincreasing depth function ``d`` on ``[0, inf)``,

    A = {(x, s): s <= 0, 0 <= x <= d(-s)},

translated along time as ``A_t = A + (0, t)``.  Monotonicity makes every
overlap a single one-dimensional tail integral:
``Leb(A ∩ A_h) = integral_h^inf d(u) du``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate


# ---------------------------------------------------------------------------
# Trawl sets
# ---------------------------------------------------------------------------

class TrawlSet:
    """Monotone trawl in one spatial dimension."""

    def depth(self, u):
        raise NotImplementedError

    def depth_inverse(self, x):
        """sup{u >= 0 : d(u) >= x} for 0 < x <= d(0), else 0."""
        raise NotImplementedError

    @property
    def leb(self) -> float:
        raise NotImplementedError

    def overlap(self, h: float) -> float:
        """Leb(A ∩ A_h) = integral_h^inf d(u) du (h >= 0)."""
        raise NotImplementedError

    def tail_time(self, eps: float) -> float:
        """Smallest T with integral_T^inf d <= eps * Leb(A)."""
        raise NotImplementedError

    def contains(self, xi, s, x=0.0, t=0.0):
        """Vectorised membership of (xi, s) in A_t(x) = A + (x, t)."""
        xi = np.asarray(xi, dtype=float)
        s = np.asarray(s, dtype=float)
        rel = xi - x
        return (s <= t) & (rel >= 0.0) & (rel <= self.depth(np.maximum(t - s, 0.0)))


@dataclass(frozen=True)
class ExponentialTrawl(TrawlSet):
    """d(u) = exp(-lam * u); Leb(A) = 1/lam and r(h) = exp(-lam h)."""

    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")

    def depth(self, u):
        return np.exp(-self.lam * np.asarray(u, dtype=float))

    def depth_inverse(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = -np.log(np.clip(x, 0.0, 1.0)) / self.lam
        return np.where(x > 1.0, 0.0, out)

    @property
    def leb(self):
        return 1.0 / self.lam

    def overlap(self, h):
        if h < 0:
            raise ValueError("lag must be nonnegative")
        return math.exp(-self.lam * h) / self.lam

    def tail_time(self, eps):
        return -math.log(eps) / self.lam


@dataclass(frozen=True)
class TabulatedTrawl(TrawlSet):
    """Piecewise-linear depth through ``knots = [(u_0, d_0), ...]``.

    Depth is 0 beyond the last knot, so a step of height 1 on [0, 2) is
    ``knots = [(0, 1), (2, 1)]``.
    """

    knots: tuple

    def __post_init__(self):
        knots = tuple((float(u), float(d)) for u, d in self.knots)
        object.__setattr__(self, "knots", knots)
        us = np.array([u for u, _ in knots])
        ds = np.array([d for _, d in knots])
        if len(knots) < 1 or us[0] != 0.0:
            raise ValueError("knots must start at u=0")
        if np.any(np.diff(us) <= 0):
            raise ValueError("knot abscissae must be strictly increasing")
        if np.any(np.diff(ds) > 0) or np.any(ds < 0):
            raise ValueError("depth must be nonincreasing and nonnegative")

    def _arrays(self):
        us = np.array([u for u, _ in self.knots])
        ds = np.array([d for _, d in self.knots])
        return us, ds

    def depth(self, u):
        us, ds = self._arrays()
        return np.interp(np.asarray(u, dtype=float), us, ds, right=0.0)

    def depth_inverse(self, x):
        us, ds = self._arrays()
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for k, xv in enumerate(x):
            if xv > ds[0]:
                out[k] = 0.0
            elif xv <= ds[-1]:
                out[k] = us[-1]
            else:
                i = int(np.searchsorted(-ds, -xv, side="right")) - 1
                # segment [u_i, u_{i+1}] with d_i >= xv > d_{i+1}
                frac = (ds[i] - xv) / (ds[i] - ds[i + 1])
                out[k] = us[i] + frac * (us[i + 1] - us[i])
        return out if out.size > 1 else float(out[0])

    @property
    def leb(self):
        us, ds = self._arrays()
        return float(np.trapezoid(ds, us))

    def overlap(self, h):
        if h < 0:
            raise ValueError("lag must be nonnegative")
        us, ds = self._arrays()
        if h >= us[-1]:
            return 0.0
        us2 = np.concatenate(([h], us[us > h]))
        ds2 = np.concatenate(([float(np.interp(h, us, ds))], ds[us > h]))
        return float(np.trapezoid(ds2, us2))

    def tail_time(self, eps):
        return float(self.knots[-1][0])


TRAWL_KINDS = {"exponential": "ExponentialTrawl", "tabulated": "TabulatedTrawl"}


def make_trawl(kind: str, **params) -> TrawlSet:
    kind = kind.lower()
    if kind == "exponential":
        return ExponentialTrawl(lam=params.get("lam", params.get("lambda", 1.0)))
    if kind == "tabulated":
        return TabulatedTrawl(knots=tuple(tuple(k) for k in params["knots"]))
    raise ValueError(f"unknown trawl kind {kind!r}")


# ---------------------------------------------------------------------------
# Module-level trawl operations
# ---------------------------------------------------------------------------

def leb_measure(trawl: TrawlSet) -> float:
    return trawl.leb


def overlap(trawl: TrawlSet, h: float) -> float:
    return trawl.overlap(h)


def increment_sets(trawl: TrawlSet, h: float):
    """(Leb(A_h \\ A_0), Leb(A_0 \\ A_h)); both equal leb - overlap for
    translation-invariant trawls."""
    if h <= 0:
        raise ValueError("lag must be positive")
    forward = trawl.leb - trawl.overlap(h)
    return forward, forward


# ---------------------------------------------------------------------------
# Ambit sets
# ---------------------------------------------------------------------------

class AmbitSet:
    """Nonanticipative region A_t(x) = A + (x, t) of influence for (x, t)."""

    def contains(self, xi, s, x=0.0, t=0.0):
        raise NotImplementedError

    def measure(self) -> float:
        raise NotImplementedError

    def spatial_extent(self):
        """(lo, hi) with A_t(x) ⊆ [x + lo, x + hi] in space."""
        raise NotImplementedError

    def time_extent(self, eps: float) -> float:
        """T with Leb(A ∩ {s < t - T}) <= eps * Leb(A)."""
        raise NotImplementedError


@dataclass(frozen=True)
class TrawlAmbitSet(AmbitSet):
    trawl: TrawlSet

    def contains(self, xi, s, x=0.0, t=0.0):
        return self.trawl.contains(xi, s, x=x, t=t)

    def measure(self):
        return self.trawl.leb

    def spatial_extent(self):
        return 0.0, float(self.trawl.depth(0.0))

    def time_extent(self, eps):
        return self.trawl.tail_time(eps)


@dataclass(frozen=True)
class ProductAmbitSet(AmbitSet):
    """A_t(x) = (x + box) x (t - t_back, t] for a box of spatial offsets.

    ``box`` is (lo, hi) in one spatial dimension or ((lo1, hi1), (lo2, hi2))
    in two; only point membership and measures are defined for d=2.
    """

    box: tuple
    t_back: float

    def __post_init__(self):
        if self.t_back <= 0:
            raise ValueError("t_back must be positive")

    @property
    def ndim(self):
        return 2 if isinstance(self.box[0], (tuple, list)) else 1

    def _boxes(self):
        return self.box if self.ndim == 2 else (self.box,)

    def contains(self, xi, s, x=0.0, t=0.0):
        s = np.asarray(s, dtype=float)
        ok = (s <= t) & (s > t - self.t_back)
        if self.ndim == 1:
            rel = np.asarray(xi, dtype=float) - x
            lo, hi = self.box
            return ok & (rel >= lo) & (rel <= hi)
        for k, (lo, hi) in enumerate(self._boxes()):
            rel = np.asarray(xi[k], dtype=float) - np.asarray(x[k], dtype=float)
            ok = ok & (rel >= lo) & (rel <= hi)
        return ok

    def measure(self):
        vol = self.t_back
        for lo, hi in self._boxes():
            vol *= hi - lo
        return vol

    def spatial_extent(self):
        if self.ndim != 1:
            raise ValueError("spatial extent only defined for one spatial dimension")
        return self.box

    def time_extent(self, eps):
        return self.t_back


# ---------------------------------------------------------------------------
# Meta-times
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x_lo, x_hi] x [t_lo, t_hi] in space-time."""

    x_lo: float
    x_hi: float
    t_lo: float
    t_hi: float

    def volume(self):
        return (self.x_hi - self.x_lo) * (self.t_hi - self.t_lo)


@dataclass(frozen=True)
class MetaTimeMap:
    """Density-based meta-time T(x, t) = (x, integral_0^t tau_s(x) ds).

    ``tau`` is a nonnegative density field tau(x, t); the image volume of a
    region equals T(A) = integral_A tau, the quantity the subordinated
    sampling uses as its variance time.
    """

    tau: object  # callable (x, t) -> nonnegative, vectorised

    def tau_plus(self, x: float, t: float) -> float:
        val, _ = integrate.quad(lambda s: float(self.tau(x, s)), 0.0, t, limit=200)
        return val

    def map_point(self, x: float, t: float):
        return x, self.tau_plus(x, t)

    def image_volume(self, rect: Rect) -> float:
        xs = np.linspace(rect.x_lo, rect.x_hi, 41)
        ts = np.linspace(rect.t_lo, rect.t_hi, 41)
        sample = self.tau(xs[:, None], ts[None, :])
        if np.any(np.asarray(sample) < 0):
            raise ValueError("meta-time density tau must be nonnegative")
        val, _ = integrate.dblquad(
            lambda s, x: float(self.tau(x, s)),
            rect.x_lo, rect.x_hi, rect.t_lo, rect.t_hi)
        return val


def meta_time_image_volume(meta: MetaTimeMap, rect: Rect) -> float:
    return meta.image_volume(rect)
