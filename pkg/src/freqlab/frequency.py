"""Frequency functions of discrete solutions and their monotonicity checks.

The central object is the Almgren frequency

    N(r) = r D(r) / H(r),
    D(r) = int_{B_r} <A grad u, grad u>,
    H(r) = int_{boundary B_r} u^2 mu,   mu = <A x/|x|, x/|x|>,

computed at grid radii of a solved Dirichlet problem.  D uses the
boundary-flux form of the discrete energy (superconvergent at grid
radii) with the volume form as a silent cross-check.  The modified
two-scale frequency replaces H by the scalar-weighted normalized mass
h(r) and compares two radii directly, which is the quantity the growth
estimates propagate.

Verification helpers check, by centered finite differences on the
geometric radial grid, the almost-monotonicity bound
d/dr log N >= -C (M + delta/r), the derivative identity
d/dr log(r^(1-n) H) = 2N/r + e(r), and exact monotonicity for
0-homogeneous isotropic weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .coefficients import Arity, CoefficientField, FieldError
from .solver import (
    DiscreteSolution,
    boundary_mass,
    boundary_mass_scalar,
    dirichlet_energy,
    dirichlet_energy_flux,
    volume_mean_square,
)

__all__ = [
    "AlmostMonotonicityReport",
    "FrequencyError",
    "FrequencyProfile",
    "HIdentityReport",
    "HomogeneousMonotonicityReport",
    "IndeterminateOrderError",
    "VanishingBoundaryError",
    "VanishingOrderFit",
    "WeightKind",
    "almgren_frequency",
    "average_frequency",
    "doubling_index",
    "two_scale_frequency",
    "vanishing_order",
    "verify_H_identity",
    "verify_almost_monotonicity",
    "verify_homogeneous_monotonicity",
]


class FrequencyError(RuntimeError):
    """A frequency quantity could not be computed."""


class VanishingBoundaryError(FrequencyError):
    """Boundary mass vanished at some radius; u looks trivial there."""


class IndeterminateOrderError(FrequencyError):
    """Vanishing-order fit is degenerate (values at noise level)."""


class WeightKind(Enum):
    MU_WEIGHTED = "mu"
    SCALAR_WEIGHTED = "scalar"


@dataclass(frozen=True)
class FrequencyProfile:
    """Sampled frequency data on decreasing radii with N = r D / H."""

    radii: np.ndarray
    D: np.ndarray
    H: np.ndarray
    N: np.ndarray
    weight_kind: WeightKind

    def __post_init__(self) -> None:
        r = np.asarray(self.radii, dtype=float)
        for name in ("radii", "D", "H", "N"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))
        if r.ndim != 1 or np.any(np.diff(r) >= 0):
            raise ValueError("profile radii must be strictly decreasing")
        if self.D.shape != r.shape or self.H.shape != r.shape \
                or self.N.shape != r.shape:
            raise ValueError("profile columns must share the radii shape")
        if not (np.all(np.isfinite(self.D)) and np.all(np.isfinite(self.H))
                and np.all(np.isfinite(self.N))):
            raise ValueError("profile entries must be finite")
        if np.any(self.H <= 0.0):
            raise ValueError("boundary masses must be positive")
        recon = self.radii * self.D / self.H
        if np.max(np.abs(recon - self.N)) > 1e-12 * max(1.0, np.max(np.abs(self.N))):
            raise ValueError("N does not equal r D / H")

    def __len__(self) -> int:
        return self.radii.size

    def ascending(self) -> tuple[np.ndarray, np.ndarray]:
        """(radii, N) sorted by increasing radius."""
        return self.radii[::-1].copy(), self.N[::-1].copy()

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [(float(r), float(d), float(h), float(n))
                for r, d, h, n in zip(self.radii, self.D, self.H, self.N)]


def _vanishing_threshold(u: DiscreteSolution) -> float:
    return 1e-14 * float(np.mean(u.values ** 2))


def _sorted_radii(u: DiscreteSolution,
                  radii: Optional[Sequence[float]]) -> np.ndarray:
    if radii is None:
        rr = u.grid.radii.copy()
    else:
        rr = np.asarray(radii, dtype=float)
        if rr.ndim != 1 or rr.size == 0:
            raise ValueError("need a nonempty list of radii")
    return np.sort(rr)[::-1]


def almgren_frequency(u: DiscreteSolution, f: CoefficientField,
                      radii: Optional[Sequence[float]] = None
                      ) -> FrequencyProfile:
    """Frequency profile N(r) = r D(r) / H(r) on the given radii
    (default: every grid radius), sorted decreasing.

    Raises VanishingBoundaryError, naming the radius, where H falls
    below 1e-14 times the grid mean of u^2."""
    rr = _sorted_radii(u, radii)
    thr = _vanishing_threshold(u)
    # absolute floor for the energy cross-check: rounding noise in the
    # flux form scales with u^2 even when the true energy is zero
    floor = 1e-12 * float(np.mean(u.values ** 2))
    d_vals = np.empty(rr.size)
    h_vals = np.empty(rr.size)
    for i, r in enumerate(rr):
        h = boundary_mass(u, f, float(r))
        if h <= thr:
            raise VanishingBoundaryError(
                f"boundary mass {h:.3e} at r={r:.6g} is below the vanishing "
                f"threshold {thr:.3e}")
        d_flux = dirichlet_energy_flux(u, float(r))
        d_vol = dirichlet_energy(u, float(r))
        if abs(d_flux - d_vol) > 1e-6 * abs(d_vol) + floor:
            raise FrequencyError(
                f"energy forms disagree at r={r:.6g}: "
                f"flux {d_flux:.12e} vs volume {d_vol:.12e}")
        d_vals[i] = d_flux
        h_vals[i] = h
    n_vals = rr * d_vals / h_vals
    return FrequencyProfile(rr, d_vals, h_vals, n_vals,
                            WeightKind.MU_WEIGHTED)


def two_scale_frequency(u: DiscreteSolution, abar: CoefficientField,
                        r: float, rho: float) -> float:
    """Modified frequency between two radii:
    (1 / (2 log(r/rho))) log(h(r) / h(rho)) with the scalar-weighted
    normalized boundary mass h."""
    if not 0.0 < rho < r:
        raise ValueError(f"need 0 < rho < r, got rho={rho}, r={r}")
    thr = _vanishing_threshold(u)
    h_r = boundary_mass_scalar(u, abar, r)
    h_rho = boundary_mass_scalar(u, abar, rho)
    if h_rho <= thr or h_r <= thr:
        bad = rho if h_rho <= thr else r
        raise VanishingBoundaryError(
            f"normalized boundary mass vanishes at r={bad:.6g}")
    return math.log(h_r / h_rho) / (2.0 * math.log(r / rho))


def doubling_index(u: DiscreteSolution, f: CoefficientField,
                   r: float) -> float:
    """log2 of the ratio of unweighted boundary means of u^2 at radii r
    and r/2; for a degree-k homogeneous solution this is 2k.  The field
    argument identifies the solve but the means are unweighted."""
    del f
    one = CoefficientField.constant(1.0, n=u.coefficient.n)
    thr = _vanishing_threshold(u)
    top = boundary_mass_scalar(u, one, r)
    bot = boundary_mass_scalar(u, one, r / 2.0)
    if bot <= thr or top <= thr:
        bad = r / 2.0 if bot <= thr else r
        raise VanishingBoundaryError(
            f"boundary mean vanishes at r={bad:.6g}")
    return math.log2(top / bot)


@dataclass(frozen=True)
class VanishingOrderFit:
    """Least-squares vanishing order from volume means."""

    order: float
    residual: float
    radii: np.ndarray

    def to_dict(self) -> dict:
        return {"order": self.order, "residual": self.residual,
                "radii": [float(r) for r in self.radii]}


def vanishing_order(u: DiscreteSolution,
                    radii: Sequence[float]) -> VanishingOrderFit:
    """Fitted vanishing order: half the least-squares slope of
    log(mean_{B_r} u^2) against log r.

    Needs at least 5 radii spanning at least 2 octaves.  A fit on
    values at the noise floor raises IndeterminateOrderError."""
    rr = np.sort(np.asarray(radii, dtype=float))
    if rr.size < 5:
        raise ValueError(f"need at least 5 radii, got {rr.size}")
    if rr[-1] < 4.0 * rr[0] * (1.0 - 1e-12):
        raise ValueError(
            f"radii span {rr[-1] / rr[0]:.3g}x; need at least 2 octaves (4x)")
    means = np.array([volume_mean_square(u, float(r)) for r in rr])
    floor = 1e-28 * max(1.0, float(np.max(np.abs(u.values)) ** 2))
    if np.all(means <= floor):
        raise IndeterminateOrderError(
            "volume means are at the noise floor; order is indeterminate")
    if np.any(means <= 0.0):
        raise IndeterminateOrderError(
            "volume means vanish at some radii; order is indeterminate")
    x = np.log(rr)
    y = np.log(means)
    coef, stats = np.polynomial.polynomial.polyfit(x, y, 1, full=True)
    slope = coef[1]
    ssr = float(stats[0][0]) if len(stats[0]) else 0.0
    return VanishingOrderFit(float(slope / 2.0),
                             math.sqrt(ssr / rr.size), rr)


def average_frequency(profile: FrequencyProfile, r: float,
                      rho: float) -> float:
    """dt/t-weighted trapezoid average of N over profile samples inside
    [rho, r]; the h-derivative identity makes this the continuum value
    of the two-scale frequency."""
    if not 0.0 < rho < r:
        raise ValueError(f"need 0 < rho < r, got rho={rho}, r={r}")
    rr, nn = profile.ascending()
    keep = (rr >= rho * (1.0 - 1e-12)) & (rr <= r * (1.0 + 1e-12))
    if np.count_nonzero(keep) < 2:
        raise ValueError("need at least two profile samples inside [rho, r]")
    x = np.log(rr[keep])
    y = nn[keep]
    return float(np.trapezoid(y, x) / (x[-1] - x[0]))


# -- verification reports ------------------------------------------------


@dataclass(frozen=True)
class AlmostMonotonicityReport:
    """Fit of d/dr log N >= -C (M + delta/r) on a profile."""

    fitted_c: float
    violations: np.ndarray
    radii: np.ndarray
    slopes: np.ndarray
    margins: np.ndarray
    m_bound: float
    delta: float

    def to_dict(self) -> dict:
        return {
            "fitted_c": self.fitted_c,
            "m_bound": self.m_bound,
            "delta": self.delta,
            "violations": [float(r) for r in self.violations],
            "per_radius": [
                {"r": float(r), "slope": float(s), "margin": float(c)}
                for r, s, c in zip(self.radii, self.slopes, self.margins)],
        }


def verify_almost_monotonicity(profile: FrequencyProfile, m_bound: float,
                               delta: float) -> AlmostMonotonicityReport:
    """Check the almost-monotonicity bound by centered differences of
    log N in log r.  fitted_c is the smallest constant making every
    sample pass; samples needing more than ten times the median
    constant (beyond a 1e-6 slack) are listed as violations."""
    rr, nn = profile.ascending()
    if rr.size < 3:
        raise ValueError("need at least 3 profile samples")
    if np.any(nn <= 0.0):
        raise FrequencyError("log N undefined: profile has N <= 0")
    x = np.log(rr)
    y = np.log(nn)
    mid = slice(1, rr.size - 1)
    slopes = (y[2:] - y[:-2]) / (x[2:] - x[:-2]) / rr[mid]
    norms = m_bound + delta / rr[mid]
    norms = np.where(norms > 0.0, norms, 1.0)
    margins = np.maximum(0.0, -slopes) / norms
    fitted_c = float(margins.max()) if margins.size else 0.0
    median_c = float(np.median(margins)) if margins.size else 0.0
    bad = margins > 10.0 * median_c + 1e-6
    return AlmostMonotonicityReport(
        fitted_c, rr[mid][bad].copy(), rr[mid].copy(), slopes, margins,
        m_bound, delta)


@dataclass(frozen=True)
class HIdentityReport:
    """Residual of d/dr log(r^(1-n) H) = 2 N / r + e(r)."""

    radii: np.ndarray
    errors: np.ndarray
    sup_error: float
    normalized_sup: Optional[float]
    m_bound: float
    delta: float

    def to_dict(self) -> dict:
        return {
            "sup_error": self.sup_error,
            "normalized_sup": self.normalized_sup,
            "m_bound": self.m_bound,
            "delta": self.delta,
            "per_radius": [{"r": float(r), "e": float(e)}
                           for r, e in zip(self.radii, self.errors)],
        }


def verify_H_identity(u: DiscreteSolution, f: CoefficientField,
                      radii: Optional[Sequence[float]] = None,
                      m_bound: float = 0.0,
                      delta: float = 0.0) -> HIdentityReport:
    """Measure e(r) = d/dr log(r^(1-n) H(r)) - 2 N(r) / r by centered
    differences; the normalized supremum divides by M + delta/r when
    that is positive."""
    profile = almgren_frequency(u, f, radii)
    rr, nn = profile.ascending()
    if rr.size < 3:
        raise ValueError("need at least 3 radii")
    n_dim = u.coefficient.n
    h_norm = profile.H[::-1] * rr ** (1 - n_dim)
    x = np.log(rr)
    y = np.log(h_norm)
    mid = slice(1, rr.size - 1)
    deriv = (y[2:] - y[:-2]) / (x[2:] - x[:-2]) / rr[mid]
    errors = deriv - 2.0 * nn[mid] / rr[mid]
    norms = m_bound + delta / rr[mid]
    normalized = float(np.max(np.abs(errors) / norms)) \
        if np.all(norms > 0.0) else None
    return HIdentityReport(rr[mid].copy(), errors,
                           float(np.max(np.abs(errors))), normalized,
                           m_bound, delta)


@dataclass(frozen=True)
class HomogeneousMonotonicityReport:
    """Monotonicity of N for a 0-homogeneous isotropic weight."""

    radii: np.ndarray
    n_values: np.ndarray
    epsilon: float
    violations: np.ndarray
    max_drop: float
    h_identity_residual: float

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "max_drop": self.max_drop,
            "h_identity_residual": self.h_identity_residual,
            "violations": [float(r) for r in self.violations],
            "per_radius": [{"r": float(r), "N": float(n)}
                           for r, n in zip(self.radii, self.n_values)],
        }


def _check_zero_homogeneous(abar: CoefficientField) -> None:
    if abar.arity is not Arity.ISOTROPIC:
        raise FieldError("homogeneous monotonicity needs an isotropic weight")
    rng = np.random.default_rng(0x0DD)
    pts = rng.normal(size=(8, abar.n))
    pts *= (0.5 * abar.domain_radius
            / np.linalg.norm(pts, axis=1, keepdims=True))
    near = abar.evaluate(pts)
    far = abar.evaluate(0.37 * pts)
    if np.max(np.abs(near - far)) > 1e-8 * max(1.0, np.max(np.abs(near))):
        raise FieldError("weight is not 0-homogeneous along rays")


def verify_homogeneous_monotonicity(u: DiscreteSolution,
                                    abar: CoefficientField,
                                    radii: Optional[Sequence[float]] = None,
                                    epsilon: Optional[float] = None
                                    ) -> HomogeneousMonotonicityReport:
    """For 0-homogeneous isotropic weights the frequency is exactly
    nondecreasing in the continuum; check the discrete profile within
    tolerance epsilon (default 5e-3 at N_theta = 256, scaled at the
    discretization order) and measure the residual of the exact
    identity d log h / d log r = 2 N."""
    _check_zero_homogeneous(abar)
    if epsilon is None:
        epsilon = 5e-3 * (256.0 / u.grid.n_theta) ** 2
    profile = almgren_frequency(u, abar, radii)
    rr, nn = profile.ascending()
    if rr.size < 3:
        raise ValueError("need at least 3 radii")
    drops = nn[:-1] - nn[1:]
    bad = drops > epsilon
    max_drop = float(max(0.0, drops.max())) if drops.size else 0.0
    h_vals = np.array([boundary_mass_scalar(u, abar, float(r)) for r in rr])
    x = np.log(rr)
    y = np.log(h_vals)
    deriv = (y[2:] - y[:-2]) / (x[2:] - x[:-2])
    residual = float(np.max(np.abs(deriv - 2.0 * nn[1:-1])))
    return HomogeneousMonotonicityReport(
        rr.copy(), nn.copy(), float(epsilon), rr[:-1][bad].copy(),
        max_drop, residual)
