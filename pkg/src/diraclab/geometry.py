"""Warped-product surfaces dt^2 + f(t)^2 dphi^2: warps, curvature, area.

All built-in geometry is a surface of revolution over an interval
(t_min, t_max) with circle period P.  Gauss curvature is K = -f''/f, the
scalar curvature is 2K, the curvature term acting on spinors is scal/4 and
the one acting on 1-forms is K itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import DomainError, GeometryError, InfiniteAreaError

END_BOUNDARY = "incomplete-boundary"
END_CUSP = "cusp-complete"

# f values below this (relative to the warp maximum) mark an end as singular:
# the rotation circle degenerates there (a pole or cone point).
_SINGULAR_REL = 1e-8


class CosineWarp:
    """f(t) = cos t, the round-sphere profile on (-pi/2, pi/2)."""

    variant = "cosine"

    def value(self, t):
        return np.cos(t)

    def deriv(self, t):
        return -np.sin(t)

    def second(self, t):
        return -np.cos(t)

    def to_json(self):
        return {"variant": self.variant}

    def __eq__(self, other):
        return isinstance(other, CosineWarp)


class ConstantWarp:
    """f(t) = c > 0, a flat cylinder of circumference P*c."""

    variant = "constant"

    def __init__(self, c: float = 1.0):
        if not c > 0:
            raise GeometryError(f"constant warp needs c > 0, got {c}")
        self.c = float(c)

    def value(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.c)

    def deriv(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def second(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def to_json(self):
        return {"variant": self.variant, "c": self.c}

    def __eq__(self, other):
        return isinstance(other, ConstantWarp) and other.c == self.c


class ExpCuspWarp:
    """f(t) = c * exp(-t), a finite-area cusp opening toward t -> infinity."""

    variant = "exp_cusp"

    def __init__(self, c: float = 1.0):
        if not c > 0:
            raise GeometryError(f"cusp warp needs c > 0, got {c}")
        self.c = float(c)

    def value(self, t):
        return self.c * np.exp(-np.asarray(t, dtype=float))

    def deriv(self, t):
        return -self.c * np.exp(-np.asarray(t, dtype=float))

    def second(self, t):
        return self.c * np.exp(-np.asarray(t, dtype=float))

    def to_json(self):
        return {"variant": self.variant, "c": self.c}

    def __eq__(self, other):
        return isinstance(other, ExpCuspWarp) and other.c == self.c


class TabulatedWarp:
    """Cubic-spline warp through sample points (natural end conditions).

    Lets callers inject custom metrics without symbolic machinery; first and
    second derivatives come from the spline.  Samples must be strictly
    increasing in t and strictly positive in f.
    """

    variant = "tabulated"

    def __init__(self, ts, fs):
        ts = np.asarray(ts, dtype=float)
        fs = np.asarray(fs, dtype=float)
        if ts.ndim != 1 or ts.size < 4 or ts.shape != fs.shape:
            raise GeometryError("tabulated warp needs >= 4 matched samples")
        if np.any(np.diff(ts) <= 0):
            raise GeometryError("tabulated warp samples must increase in t")
        if np.any(fs <= 0):
            raise GeometryError("tabulated warp samples must be positive")
        self.ts = ts
        self.fs = fs
        self._spline = CubicSpline(ts, fs, bc_type="natural")

    def value(self, t):
        return self._spline(np.asarray(t, dtype=float))

    def deriv(self, t):
        return self._spline(np.asarray(t, dtype=float), 1)

    def second(self, t):
        return self._spline(np.asarray(t, dtype=float), 2)

    def to_json(self):
        return {
            "variant": self.variant,
            "ts": [float(x) for x in self.ts],
            "fs": [float(x) for x in self.fs],
        }

    def __eq__(self, other):
        return (
            isinstance(other, TabulatedWarp)
            and np.array_equal(other.ts, self.ts)
            and np.array_equal(other.fs, self.fs)
        )


_WARP_VARIANTS = {
    "cosine": lambda d: CosineWarp(),
    "constant": lambda d: ConstantWarp(d["c"]),
    "exp_cusp": lambda d: ExpCuspWarp(d["c"]),
    "tabulated": lambda d: TabulatedWarp(d["ts"], d["fs"]),
}


def warp_from_json(doc: dict):
    try:
        return _WARP_VARIANTS[doc["variant"]](doc)
    except KeyError as exc:
        raise GeometryError(f"unknown warp document: {doc!r}") from exc


@dataclass(frozen=True)
class WarpedSurface:
    """Metric dt^2 + f(t)^2 dphi^2 on (t_min, t_max) x R/(P Z).

    t_max may be math.inf only when the upper end is labeled cusp-complete
    (the profile then must decay fast enough for finite area).
    end_labels tags the lower and upper end, in that order.
    """

    warp: object
    t_min: float
    t_max: float
    period: float
    end_labels: tuple = (END_BOUNDARY, END_BOUNDARY)

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise GeometryError("need t_min < t_max")
        if not self.period > 0:
            raise GeometryError("need circle period P > 0")
        for lab in self.end_labels:
            if lab not in (END_BOUNDARY, END_CUSP):
                raise GeometryError(f"unknown end label {lab!r}")
        if math.isinf(self.t_min) and self.end_labels[0] != END_CUSP:
            raise GeometryError("infinite lower end must be cusp-complete")
        if math.isinf(self.t_max) and self.end_labels[1] != END_CUSP:
            raise GeometryError("infinite upper end must be cusp-complete")

    def f(self, t):
        return self.warp.value(t)

    def fprime(self, t):
        return self.warp.deriv(t)

    def fsecond(self, t):
        return self.warp.second(t)

    def to_json(self):
        return {
            "schema_version": 1,
            "warp": self.warp.to_json(),
            "t_min": self.t_min,
            "t_max": self.t_max,
            "period": self.period,
            "end_labels": list(self.end_labels),
        }


def surface_from_json(doc: dict) -> WarpedSurface:
    if doc.get("schema_version") != 1:
        raise GeometryError(
            f"unsupported surface schema_version {doc.get('schema_version')!r}"
        )
    return WarpedSurface(
        warp=warp_from_json(doc["warp"]),
        t_min=float(doc["t_min"]),
        t_max=float(doc["t_max"]),
        period=float(doc["period"]),
        end_labels=tuple(doc["end_labels"]),
    )


def _warp_scale(surface: WarpedSurface) -> float:
    a = surface.t_min if math.isfinite(surface.t_min) else 0.0
    b = surface.t_max if math.isfinite(surface.t_max) else a + 1.0
    probe = np.linspace(a + 1e-9 * (b - a), b - 1e-9 * (b - a), 33)
    return float(np.max(surface.f(probe)))


def end_kind(surface: WarpedSurface, side: str) -> str:
    """Classify one end: 'cusp', 'singular' (f -> 0) or 'regular'.

    Singular ends are rotation axes (sphere poles, cone tips); the circle
    degenerates and the truncated problem needs the singular-end treatment
    in the operators module.  Regular ends are honest boundary circles.
    """
    i = 0 if side == "lower" else 1
    if surface.end_labels[i] == END_CUSP:
        return "cusp"
    t_end = surface.t_min if side == "lower" else surface.t_max
    span = min(surface.t_max - surface.t_min, 1.0) if math.isfinite(
        surface.t_max - surface.t_min
    ) else 1.0
    probe = t_end + 1e-12 * span if side == "lower" else t_end - 1e-12 * span
    f_end = float(surface.f(probe))
    return "singular" if f_end <= _SINGULAR_REL * _warp_scale(surface) else "regular"


def edge_slope(surface: WarpedSurface, side: str) -> float:
    """|f'| at a singular end; sets the local cone rate f ~ c1 * r."""
    t_end = surface.t_min if side == "lower" else surface.t_max
    c1 = abs(float(surface.fprime(t_end)))
    if not (math.isfinite(c1) and c1 > 0):
        raise GeometryError(f"degenerate edge slope at {side} end")
    return c1


def gauss_curvature(surface: WarpedSurface, t):
    """K(t) = -f''(t)/f(t); t must lie strictly inside the interval."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= surface.t_min) or np.any(arr >= surface.t_max):
        raise DomainError(
            f"t outside ({surface.t_min}, {surface.t_max})"
        )
    out = -surface.fsecond(arr) / surface.f(arr)
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


def area(surface: WarpedSurface, rel_tol: float = 1e-12) -> float:
    """P * integral of f over the interval, with analytic cusp tails.

    Raises InfiniteAreaError when the integral diverges (e.g. a constant
    warp on an infinite interval).
    """
    lo, hi = surface.t_min, surface.t_max
    total = 0.0
    if math.isinf(lo) or math.isinf(hi):
        if not isinstance(surface.warp, ExpCuspWarp):
            raise InfiniteAreaError(
                "infinite interval needs an explicit decaying cusp profile"
            )
        # c*exp(-t) has finite mass only toward +infinity
        if math.isinf(lo):
            raise InfiniteAreaError("exp cusp diverges toward t -> -infinity")
        t_split = lo + 1.0
        head, _ = quad(lambda x: float(surface.f(x)), lo, t_split,
                       epsabs=1e-14, epsrel=rel_tol, limit=200)
        tail = float(surface.f(t_split))  # integral of c e^{-t} beyond t_split
        total = head + tail
    else:
        val, err = quad(lambda x: float(surface.f(x)), lo, hi,
                        epsabs=1e-14, epsrel=rel_tol, limit=200)
        if not math.isfinite(val):
            raise InfiniteAreaError("warp integral diverged")
        total = val
    result = surface.period * total
    if not math.isfinite(result) or result <= 0:
        raise InfiniteAreaError(f"area came out {result}")
    return result


@dataclass(frozen=True)
class CurvatureProfile:
    """Curvature data sampled on a grid, plus derived lower bounds.

    kappa_spinor is the infimum of scal/4 (the spinor curvature term),
    kappa_oneform the infimum of K (the Ricci bound on a surface).  The
    infima include refined samples near the interval ends so boundary
    behavior on incomplete surfaces is not missed.
    """

    nodes: np.ndarray
    gauss: np.ndarray
    scal: np.ndarray
    kappa_spinor: float
    kappa_oneform: float
    kappa_positive: bool
    kappa_growing_ends: bool
    tail_kappa: tuple  # per-end infimum of scal/4 over the outer windows


def curvature_profile(surface: WarpedSurface, grid) -> CurvatureProfile:
    """Sample K and scal on the grid and extract curvature lower bounds.

    grid is any object with a `nodes` array lying inside the open interval
    (the operators.Grid type qualifies).
    """
    nodes = np.asarray(grid.nodes, dtype=float)
    if np.any(nodes <= surface.t_min) or np.any(nodes >= surface.t_max):
        raise DomainError("grid nodes outside the open interval")
    K = gauss_curvature(surface, nodes)
    scal = 2.0 * K

    # refine the infimum near both ends of the sampled span: monotone tails
    # toward an end can dip below every interior node value
    t0, t1 = nodes[0], nodes[-1]
    h = (t1 - t0) / max(len(nodes) - 1, 1)
    extras = []
    for anchor, direction in ((t0, -1.0), (t1, +1.0)):
        for frac in (0.875, 0.5, 0.125):
            probe = anchor + direction * frac * h
            if surface.t_min < probe < surface.t_max:
                extras.append(probe)
    K_all = np.concatenate([K, gauss_curvature(surface, np.asarray(extras))]) \
        if extras else K

    kappa_oneform = float(np.min(K_all))
    kappa_spinor = float(np.min(K_all) / 2.0)  # inf scal/4 = inf K/2

    # outermost 10% windows at each end drive the liminf-at-infinity stand-in
    w = max(2, len(nodes) // 10)
    tail_lo = float(np.min(scal[:w]) / 4.0)
    tail_hi = float(np.min(scal[-w:]) / 4.0)

    # growth indicator: spinor curvature climbing monotonically outward
    # through three chunks per side and clearly above the interior level
    kt = scal / 4.0
    chunks = np.array_split(np.arange(len(nodes)), 6)
    lo_means = [float(np.mean(kt[idx])) for idx in chunks[:3]]
    hi_means = [float(np.mean(kt[idx])) for idx in chunks[3:]]
    grow_lo = (lo_means[0] > lo_means[1] > lo_means[2]
               and lo_means[0] > 1.25 * abs(lo_means[2]) + 1e-12)
    grow_hi = (hi_means[2] > hi_means[1] > hi_means[0]
               and hi_means[2] > 1.25 * abs(hi_means[0]) + 1e-12)
    return CurvatureProfile(
        nodes=nodes,
        gauss=K,
        scal=scal,
        kappa_spinor=kappa_spinor,
        kappa_oneform=kappa_oneform,
        kappa_positive=kappa_spinor > 0,
        kappa_growing_ends=bool(grow_lo and grow_hi),
        tail_kappa=(tail_lo, tail_hi),
    )
