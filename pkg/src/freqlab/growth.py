"""Growth bounds driven by a modulus of continuity.

Everything here rests on the increasing transform

    h(t) = int_1^t ds / (s * psi(s)),        t >= 1,

whose range is unbounded exactly when the modulus is Osgood.  A quantity
``f`` obeying the differential inequality ``f'(t) >= -C1 f psi(f) g(t)``
(decay toward small ``t``, so ``f`` grows as ``t`` decreases) satisfies

    h(f(t)) <= h(f(1)) + C1 * int_t^1 g(s) ds,

and inverting ``h`` turns the right side into a pointwise bound.  The
discrete cascade iterates the worst case of the corresponding one-step
inequality on the shrinking schedule ``t_{k+1} = t_k (1 - 1/N_k)`` and is the
finite-step analogue used as an envelope for measured frequency profiles.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .modulus import Modulus

__all__ = [
    "GrowthVerdict",
    "GrowthTrace",
    "h_transform",
    "continuous_growth_bound",
    "discrete_cascade",
    "fit_consistent_c1",
    "check_interpolant_slope",
    "phi_function",
    "psi_function",
]

OVERFLOW_GUARD = 1.0e12
_BISECT_RTOL = 1.0e-9


class GrowthVerdict(enum.Enum):
    BOUNDED_ON_COMPACTS = "BoundedOnCompacts"
    BOUNDED_GLOBALLY = "BoundedGlobally"
    BLOWUP_DETECTED = "BlowupDetected"


def psi_function(m: Modulus) -> Callable[[float], float]:
    """Fast scalar ``psi`` for the hot loops (closed forms where available)."""
    if m.kind == "linear":
        return lambda s: 1.0
    if m.kind == "power":
        e = 1.0 - m.alpha
        return lambda s: s**e
    if m.kind == "log_power":
        p = m.p
        knee = math.exp(p)
        c = math.exp(-p) * p**p
        return lambda s: c * s if s < knee else math.log(s) ** p
    return lambda s: float(m.psi(s))


def phi_function(m: Modulus) -> Callable[[float], float]:
    """Fast scalar ``phi`` (the canonical integrable forcing ``g``)."""
    if m.kind == "linear":
        return lambda s: 1.0
    if m.kind == "power":
        e = m.alpha - 1.0
        return lambda s: s**e
    if m.kind == "log_power":
        p = m.p
        cut = math.exp(-p)
        c = cut * p**p
        return lambda s: c / s if s > cut else math.log(1.0 / s) ** p
    return lambda s: float(m.phi(s))


def h_transform(m: Modulus, t: float) -> float:
    """``h(t) = int_1^t ds/(s psi(s))`` by adaptive quadrature (t >= 1)."""
    if t < 1.0:
        raise ValueError("h is defined for t >= 1")
    if t == 1.0:
        return 0.0
    psi = psi_function(m)
    upper = math.log(t)
    pts = None
    if m.kind == "log_power" and upper > m.p:
        pts = [m.p]  # slope break where the constant extension hands over
    val, _ = integrate.quad(
        lambda x: 1.0 / psi(math.exp(x)), 0.0, upper, points=pts, limit=200
    )
    return float(val)


def continuous_growth_bound(
    m: Modulus,
    f1: float,
    g: Callable[[float], float],
    c1: float,
    t: float,
    *,
    g_integral: Optional[float] = None,
    guard: float = OVERFLOW_GUARD,
) -> float:
    """Upper bound ``B`` with ``h(B) = h(f1) + c1 * int_t^1 g``.

    Returns ``math.inf`` when the target level exceeds ``h(guard)``: for a
    non-Osgood modulus that is genuine blowup (the target passes the finite
    range of ``h``), for an Osgood one it means the bound is beyond the
    representable guard range.  Monotone in ``f1``, ``c1`` and the forcing.
    """
    if f1 < 1.0:
        raise ValueError("f1 must be >= 1")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if c1 < 0.0:
        raise ValueError("c1 must be nonnegative")
    if g_integral is None:
        g_integral, _ = integrate.quad(g, t, 1.0, limit=200)
    target = h_transform(m, f1) + c1 * g_integral
    if h_transform(m, guard) < target:
        return math.inf
    lo, hi = f1, guard
    # bisection on the increasing h; relative tolerance on the abscissa
    for _ in range(200):
        mid = math.sqrt(lo * hi) if hi / max(lo, 1.0) > 4.0 else 0.5 * (lo + hi)
        if h_transform(m, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _BISECT_RTOL * hi:
            break
    return 0.5 * (lo + hi)


@dataclass
class GrowthTrace:
    """Cascade output: schedule ``t``, values ``n``, and bookkeeping."""

    t: np.ndarray
    n: np.ndarray
    verdict: GrowthVerdict
    bound: float
    reached_floor: bool
    g_integrable: Optional[bool]
    doubling_ok: bool
    doubling_worst: float
    meta: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.t) - 1

    def to_rows(self):
        return [(float(tk), float(nk)) for tk, nk in zip(self.t, self.n)]


def _probe_g_integrable(g: Callable[[float], float], depth: int = 40) -> bool:
    """Condensation probe for ``int_0 g``: dyadic segments must decay."""
    segs = []
    for k in range(depth):
        a, b = 2.0 ** -(k + 1), 2.0**-k
        val, _ = integrate.quad(g, a, b, limit=100)
        segs.append(val)
    seg = np.asarray(segs)
    if seg[-1] < 1e-12 * max(seg.sum(), 1.0):
        return True
    ratios = seg[1:] / np.maximum(seg[:-1], 1e-300)
    return bool(np.all(ratios[-6:] <= 0.95))


def _doubling_spot_check(
    g: Callable[[float], float], c1: float, t_floor: float
) -> tuple[bool, float]:
    """Sample ``g(s) <= c1 g(gamma s)`` at gamma in {0.5, 0.75, 0.9}."""
    ss = np.logspace(math.log10(max(t_floor, 1e-9) * 10.0), 0.0, 25)
    worst = 0.0
    for gamma in (0.5, 0.75, 0.9):
        for s in ss:
            denom = g(gamma * s)
            if denom <= 0.0:
                return False, math.inf
            worst = max(worst, g(s) / denom)
    return worst <= c1 * (1.0 + 1e-12), worst


def discrete_cascade(
    m: Modulus,
    n0: float,
    g: Callable[[float], float],
    c1: float,
    t_floor: float,
    *,
    guard: float = OVERFLOW_GUARD,
    g_integrable: Optional[bool] = None,
    max_steps: int = 2_000_000,
) -> GrowthTrace:
    """Iterate the worst-case one-step growth down to ``t_floor``.

        t_{k+1} = t_k * (1 - 1/N_k)
        N_{k+1} = N_k + c1 * t_k * psi(N_k) * g(t_k)

    Stops at the floor (verdict from the integrability certificate: globally
    bounded for integrable ``g``, otherwise bounded on compacts), at the
    overflow guard (BlowupDetected), or at ``max_steps`` (treated as bounded
    on compacts down to the reached depth; ``reached_floor`` is False then).
    """
    if n0 <= 1.0:
        raise ValueError("n0 must exceed 1")
    if not 0.0 < t_floor < 1.0:
        raise ValueError("t_floor must lie in (0, 1)")
    if c1 < 0.0:
        raise ValueError("c1 must be nonnegative")
    psi = psi_function(m)
    if g_integrable is None:
        g_integrable = _probe_g_integrable(g)
    doubling_ok, doubling_worst = _doubling_spot_check(g, c1, t_floor)

    ts = [1.0]
    ns = [float(n0)]
    t, n = 1.0, float(n0)
    verdict = None
    reached_floor = False
    for _ in range(max_steps):
        if t <= t_floor:
            reached_floor = True
            break
        n_next = n + c1 * t * psi(n) * g(t)
        t_next = t * (1.0 - 1.0 / n)
        if n_next > guard:
            ts.append(t_next)
            ns.append(n_next)
            verdict = GrowthVerdict.BLOWUP_DETECTED
            break
        if t_next >= t:  # 1/n below float resolution: schedule stalls
            verdict = GrowthVerdict.BLOWUP_DETECTED
            break
        t, n = t_next, n_next
        ts.append(t)
        ns.append(n)
    if verdict is None:
        if reached_floor:
            verdict = (
                GrowthVerdict.BOUNDED_GLOBALLY
                if g_integrable
                else GrowthVerdict.BOUNDED_ON_COMPACTS
            )
        else:
            verdict = GrowthVerdict.BOUNDED_ON_COMPACTS
    return GrowthTrace(
        t=np.asarray(ts),
        n=np.asarray(ns),
        verdict=verdict,
        bound=float(np.max(ns)),
        reached_floor=reached_floor,
        g_integrable=g_integrable,
        doubling_ok=doubling_ok,
        doubling_worst=doubling_worst,
        meta={"c1": c1, "t_floor": t_floor, "guard": guard},
    )


def fit_consistent_c1(
    m: Modulus, trace: GrowthTrace, g: Callable[[float], float]
) -> float:
    """Smallest ``c1`` making the one-step inequality hold along a trace."""
    psi = psi_function(m)
    worst = 0.0
    t, n = trace.t, trace.n
    for k in range(len(t) - 1):
        denom = t[k] * psi(n[k]) * g(t[k])
        if denom > 0.0:
            worst = max(worst, (n[k + 1] - n[k]) / denom)
    return worst


def check_interpolant_slope(
    m: Modulus,
    trace: GrowthTrace,
    g: Callable[[float], float],
    c1: float,
) -> np.ndarray:
    """Margins of ``h'(t) >= -c1 h psi(h) g(t)`` for the linear interpolant.

    Evaluated at segment midpoints; nonnegative entries mean the inequality
    holds there.
    """
    psi = psi_function(m)
    t, n = trace.t, trace.n
    margins = np.empty(len(t) - 1)
    for k in range(len(t) - 1):
        slope = (n[k + 1] - n[k]) / (t[k + 1] - t[k])
        tm = 0.5 * (t[k] + t[k + 1])
        hm = 0.5 * (n[k] + n[k + 1])
        margins[k] = slope + c1 * hm * psi(hm) * g(tm)
    return margins
