"""Moduli of continuity and the transforms used by the growth machinery.

A modulus is a continuous, nondecreasing, concave function ``omega`` on
``[0, 1]`` with ``omega(0) = 0`` and ``omega(t) > 0`` for ``t > 0``.  Two
derived transforms drive everything downstream:

    phi(s) = omega(s) / s          (nonincreasing on (0, 1])
    psi(s) = phi(1 / s)            (nondecreasing on [1, inf))

``omega`` is Osgood when ``int_0 dt / omega(t)`` diverges.  The model family
``omega(t) = t * log(1/t)**p`` is Osgood exactly for ``p <= 1``; since the
raw formula is only monotone up to ``t = exp(-p)``, the implemented modulus
freezes at that point (``omega(t) = omega(t_cut)`` for ``t > t_cut``).  The
constant continuation is the unique extension that keeps both monotonicity
and concavity, and every reported quantity refers to the extended family.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "Modulus",
    "OsgoodClass",
    "SubmultiplicativityReport",
    "IntegrabilityReport",
    "ExponentTriple",
    "eval_phi",
    "eval_psi",
    "classify_osgood",
    "check_submultiplicative_psi",
    "check_phi_submultiplicative",
    "check_phi_integrable",
    "select_exponents",
]


class OsgoodClass(enum.Enum):
    OSGOOD = "Osgood"
    NON_OSGOOD = "NonOsgood"
    INCONCLUSIVE = "Inconclusive"


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Modulus:
    """One modulus of continuity.

    Supported kinds:

    ``linear``     ``omega(t) = t``
    ``power``      ``omega(t) = t**alpha``, ``alpha in (0, 1)``
    ``log_power``  ``omega(t) = t * log(1/t)**p`` on ``(0, t_cut]``,
                   constant for ``t > t_cut`` with ``t_cut = exp(-p)``
    ``tabulated``  log-log interpolation of sample pairs ``(t_i, omega_i)``

    Tabulated moduli extrapolate below the smallest sample with the power law
    of the innermost segment; ``omega(0) = 0`` always.
    """

    kind: str
    alpha: Optional[float] = None
    p: Optional[float] = None
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "linear":
            pass
        elif self.kind == "power":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("power modulus needs alpha in (0, 1)")
        elif self.kind == "log_power":
            if self.p is None or self.p <= 0.0:
                raise ValueError("log_power modulus needs p > 0")
        elif self.kind == "tabulated":
            self._validate_samples()
        else:
            raise ValueError(f"unknown modulus kind {self.kind!r}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def linear() -> "Modulus":
        return Modulus("linear")

    @staticmethod
    def power(alpha: float) -> "Modulus":
        return Modulus("power", alpha=float(alpha))

    @staticmethod
    def log_power(p: float) -> "Modulus":
        return Modulus("log_power", p=float(p))

    @staticmethod
    def tabulated(t: Sequence[float], omega: Sequence[float]) -> "Modulus":
        arr = np.column_stack([_as_array(t), _as_array(omega)])
        return Modulus("tabulated", samples=arr)

    def _validate_samples(self):
        s = self.samples
        if s is None or s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 2:
            raise ValueError("tabulated modulus needs >= 2 sample pairs")
        t, w = s[:, 0], s[:, 1]
        if np.any(t <= 0.0) or np.any(t > 1.0) or np.any(np.diff(t) <= 0.0):
            raise ValueError("sample abscissae must increase within (0, 1]")
        if np.any(w <= 0.0):
            raise ValueError("omega must be positive at positive samples")
        if np.any(np.diff(w) < 0.0):
            raise ValueError("omega samples must be nondecreasing")
        # concavity on sample triples: chord slopes must not increase
        slopes = np.diff(w) / np.diff(t)
        if np.any(np.diff(slopes) > 1e-9 * max(1.0, slopes[0])):
            raise ValueError("omega samples violate concavity")

    # -- evaluation --------------------------------------------------------

    @property
    def t_cut(self) -> Optional[float]:
        if self.kind == "log_power":
            return math.exp(-self.p)
        return None

    def omega(self, t) -> np.ndarray:
        """Evaluate ``omega`` on ``[0, 1]`` (vectorized)."""
        t = _as_array(t)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError("omega is defined on [0, 1]")
        if self.kind == "linear":
            return t.copy()
        if self.kind == "power":
            return t**self.alpha
        if self.kind == "log_power":
            out = np.zeros_like(t)
            cut = self.t_cut
            pos = t > 0.0
            tc = np.minimum(t[pos], cut)
            out[pos] = tc * np.log(1.0 / tc) ** self.p
            return out
        return self._omega_tabulated(t)

    def _omega_tabulated(self, t: np.ndarray) -> np.ndarray:
        ts, ws = self.samples[:, 0], self.samples[:, 1]
        out = np.zeros_like(t)
        pos = t > 0.0
        logw = np.interp(
            np.log(t[pos]),
            np.log(ts),
            np.log(ws),
        )
        # np.interp clamps; redo the left side with the first segment's slope
        below = t[pos] < ts[0]
        if np.any(below):
            m0 = (math.log(ws[1]) - math.log(ws[0])) / (
                math.log(ts[1]) - math.log(ts[0])
            )
            logw = np.where(
                below,
                math.log(ws[0]) + m0 * (np.log(t[pos]) - math.log(ts[0])),
                logw,
            )
        out[pos] = np.exp(logw)
        return out

    def phi(self, s) -> np.ndarray:
        """``phi(s) = omega(s)/s`` on ``(0, 1]`` (vectorized)."""
        s = _as_array(s)
        if np.any(s <= 0.0) or np.any(s > 1.0):
            raise ValueError("phi is defined on (0, 1]")
        return self.omega(s) / s

    def psi(self, s) -> np.ndarray:
        """``psi(s) = phi(1/s)`` on ``[1, inf)`` (vectorized)."""
        s = _as_array(s)
        if np.any(s < 1.0):
            raise ValueError("psi is defined on [1, inf)")
        return self.omega(1.0 / s) * s

    def analytic_osgood(self) -> Optional[OsgoodClass]:
        """Closed-form classification for parametric kinds, None otherwise."""
        if self.kind == "linear":
            return OsgoodClass.OSGOOD
        if self.kind == "power":
            return OsgoodClass.NON_OSGOOD
        if self.kind == "log_power":
            return OsgoodClass.OSGOOD if self.p <= 1.0 else OsgoodClass.NON_OSGOOD
        return None

    # -- serialization -----------------------------------------------------

    def to_config(self) -> dict:
        cfg: dict = {"kind": self.kind}
        if self.kind == "power":
            cfg["alpha"] = self.alpha
        elif self.kind == "log_power":
            cfg["p"] = self.p
            cfg["t_cut"] = self.t_cut
            cfg["extension"] = "constant beyond t_cut"
        elif self.kind == "tabulated":
            cfg["t"] = self.samples[:, 0].tolist()
            cfg["omega"] = self.samples[:, 1].tolist()
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "Modulus":
        kind = cfg.get("kind")
        if kind == "linear":
            return Modulus.linear()
        if kind == "power":
            return Modulus.power(cfg["alpha"])
        if kind == "log_power":
            return Modulus.log_power(cfg["p"])
        if kind == "tabulated":
            return Modulus.tabulated(cfg["t"], cfg["omega"])
        raise ValueError(f"unknown modulus kind {kind!r}")


def eval_phi(m: Modulus, s) -> np.ndarray:
    return m.phi(s)


def eval_psi(m: Modulus, s) -> np.ndarray:
    return m.psi(s)


# ---------------------------------------------------------------------------
# Osgood classification
# ---------------------------------------------------------------------------


def _dyadic_increments(m: Modulus, depth: int) -> np.ndarray:
    """``I[k] = int_{2^-(k+1)}^{2^-k} dt / omega(t)`` for ``k = 0..depth-1``."""
    out = np.empty(depth)
    for k in range(depth):
        a, b = 2.0 ** -(k + 1), 2.0**-k
        val, _ = integrate.quad(lambda t: 1.0 / float(m.omega(t)), a, b, limit=200)
        out[k] = val
    return out


def classify_osgood(
    m: Modulus,
    depth: int = 40,
    *,
    numeric_only: bool = False,
    tol: float = 1e-8,
) -> OsgoodClass:
    """Classify the Osgood condition ``int_0 dt/omega(t) = inf``.

    Parametric kinds are answered in closed form unless ``numeric_only``.
    The numeric path sums dyadic increments of ``1/omega`` and applies a
    condensation test: blocks ``B_m = sum of increments k in [2^m, 2^{m+1})``
    decay geometrically exactly when the integral converges.  Resolution is
    limited near the Osgood boundary (log_power with ``|p - 1| <~ 0.1`` comes
    back Inconclusive at the default depth).
    """
    if depth < 4:
        raise ValueError("depth must be >= 4")
    if not numeric_only:
        analytic = m.analytic_osgood()
        if analytic is not None:
            return analytic

    inc = _dyadic_increments(m, depth)
    n_blocks = int(math.floor(math.log2(depth)))
    blocks = np.array(
        [inc[2**mm : min(2 ** (mm + 1), depth)].sum() for mm in range(n_blocks)]
    )
    total = inc.sum()
    if blocks[-1] < tol * max(total, 1.0):
        return OsgoodClass.NON_OSGOOD
    # block widths double, so early ratios are inflated; judge the last two
    ratios = blocks[1:] / blocks[:-1]
    tail = ratios[-2:]
    if np.all(tail >= 0.93):
        return OsgoodClass.OSGOOD
    if np.all(tail <= 0.88):
        return OsgoodClass.NON_OSGOOD
    return OsgoodClass.INCONCLUSIVE


# ---------------------------------------------------------------------------
# Submultiplicativity checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubmultiplicativityReport:
    holds: bool
    constant: float
    worst_ratio: float
    worst_pair: tuple
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "constant": self.constant,
            "worst_ratio": self.worst_ratio,
            "worst_pair": list(self.worst_pair),
            "sample_count": self.sample_count,
        }


def check_submultiplicative_psi(
    m: Modulus, c_m: float, sample_count: int = 64
) -> SubmultiplicativityReport:
    """Check ``psi(x*y) <= c_m * psi(x) * psi(y)`` on a log grid in [1, 1e6]^2.

    The report carries the worst observed ratio ``psi(xy)/(psi(x)psi(y))`` so
    a caller can read off the smallest admissible constant.
    """
    if sample_count < 16:
        raise ValueError("sample_count must be >= 16")
    if c_m <= 0:
        raise ValueError("c_m must be positive")
    grid = np.logspace(0.0, 6.0, sample_count)
    px = m.psi(grid)
    xy = np.outer(grid, grid)
    ratios = m.psi(xy.ravel()).reshape(xy.shape) / np.outer(px, px)
    idx = np.unravel_index(np.argmax(ratios), ratios.shape)
    worst = float(ratios[idx])
    return SubmultiplicativityReport(
        holds=bool(worst <= c_m * (1.0 + 1e-12)),
        constant=float(c_m),
        worst_ratio=worst,
        worst_pair=(float(grid[idx[0]]), float(grid[idx[1]])),
        sample_count=sample_count,
    )


def check_phi_submultiplicative(
    m: Modulus, c: float, sample_count: int = 64
) -> SubmultiplicativityReport:
    """Check ``phi(s*t) <= c * phi(s) * phi(t)`` for ``0 < s, t <= 1/c``."""
    if sample_count < 16:
        raise ValueError("sample_count must be >= 16")
    if c < 1.0:
        raise ValueError("c must be >= 1")
    grid = np.logspace(-6.0, math.log10(1.0 / c), sample_count)
    pv = m.phi(grid)
    st = np.outer(grid, grid)
    ratios = m.phi(st.ravel()).reshape(st.shape) / np.outer(pv, pv)
    idx = np.unravel_index(np.argmax(ratios), ratios.shape)
    worst = float(ratios[idx])
    return SubmultiplicativityReport(
        holds=bool(worst <= c * (1.0 + 1e-12)),
        constant=float(c),
        worst_ratio=worst,
        worst_pair=(float(grid[idx[0]]), float(grid[idx[1]])),
        sample_count=sample_count,
    )


# ---------------------------------------------------------------------------
# Integrability of phi at 0
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegrabilityReport:
    finite: bool
    value: float  # integral (tail-extrapolated) when finite, partial sum otherwise
    partial_sums: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "finite": self.finite,
            "value": self.value,
            "partial_sums": self.partial_sums.tolist(),
        }


def check_phi_integrable(
    m: Modulus, depth: int = 60, tol: float = 1e-8
) -> IntegrabilityReport:
    """Decide ``int_0^1 phi(s) ds < inf`` by dyadic summation.

    Segment integrals over ``[2^-(k+1), 2^-k]`` are summed until they fall
    below ``tol`` relative to the running total (finite; geometric tail is
    extrapolated onto the value) or the condensation ratios show a
    non-summable trend (infinite; value reports the partial sum).
    """
    segs = []
    total = 0.0
    for k in range(depth):
        a, b = 2.0 ** -(k + 1), 2.0**-k
        val, _ = integrate.quad(lambda s: float(m.phi(s)), a, b, limit=200)
        segs.append(val)
        total += val
        if k >= 8 and val < tol * max(total, 1.0):
            seg = np.asarray(segs)
            ratio = seg[-1] / seg[-2] if seg[-2] > 0 else 0.0
            tail = seg[-1] * ratio / (1.0 - ratio) if ratio < 1.0 else 0.0
            return IntegrabilityReport(True, float(total + tail), np.cumsum(seg))
    seg = np.asarray(segs)
    ratios = seg[1:] / seg[:-1]
    finite = bool(np.all(ratios[-6:] <= 0.95))
    value = float(total)
    if finite:
        ratio = float(np.mean(ratios[-3:]))
        if ratio < 1.0:
            value += float(seg[-1] * ratio / (1.0 - ratio))
    return IntegrabilityReport(finite, value, np.cumsum(seg))


# ---------------------------------------------------------------------------
# Exponent selection for the iterated two-scale argument
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentTriple:
    """Exponents ``(beta, tau, eta)`` satisfying the two strict constraints

    ``tau * (2 - beta) + eta < 1``  and  ``beta * tau > 1/2 + 2 * eta``.
    """

    beta: float
    tau: float
    eta: float

    def __post_init__(self):
        if not (self.tau * (2.0 - self.beta) + self.eta < 1.0):
            raise ValueError("exponent constraint tau*(2-beta)+eta < 1 violated")
        if not (self.beta * self.tau > 0.5 + 2.0 * self.eta):
            raise ValueError("exponent constraint beta*tau > 1/2+2*eta violated")
        if not (0.0 < self.eta < 1.0 and 0.0 < self.tau < 1.0):
            raise ValueError("tau and eta must lie in (0, 1)")


_ALPHA_FLOOR = 2.0 / 3.0 + 1e-4


def select_exponents(alpha: float) -> ExponentTriple:
    """Deterministic feasible triple for Hoelder exponent ``alpha > 2/3``.

    ``beta`` is the midpoint of ``(2/3, alpha)``; ``tau`` the midpoint of its
    feasible interval ``(1/(2 beta), 1/(2 - beta))``; ``eta`` a quarter of the
    smaller slack.  Alphas within 1e-4 of 2/3 are rejected: the feasible
    interval degenerates and eta underflows any useful size.
    """
    if alpha >= 1.0:
        raise ValueError("alpha must be < 1")
    if alpha <= _ALPHA_FLOOR:
        raise ValueError("alpha must exceed 2/3 (with margin 1e-4)")
    beta = (2.0 / 3.0 + alpha) / 2.0
    tau = 0.5 * (1.0 / (2.0 * beta) + 1.0 / (2.0 - beta))
    slack_a = 1.0 - tau * (2.0 - beta)
    slack_b = (beta * tau - 0.5) / 2.0
    eta = min(slack_a, slack_b) / 4.0
    return ExponentTriple(beta=beta, tau=tau, eta=eta)
