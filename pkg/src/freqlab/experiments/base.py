"""Shared scenario plumbing: configs, margins, verdicts, report assembly.

A scenario instantiates one growth or approximation estimate as a
runnable check.  Every inequality is rearranged to expose the smallest
constant making it hold; margins are evaluated with the configured
constant and re-evaluated at double resolution, and a scenario is
Consistent only when all margins hold and the fitted constants are
stable under refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from ..coefficients import (
    Arity,
    CoefficientField,
    empirical_modulus,
    generate_holder,
)
from ..frequency import almgren_frequency
from ..modulus import Modulus
from ..solver import (
    DiscreteSolution,
    PolarGrid,
    boundary_mass,
    boundary_mass_scalar,
    solve_dirichlet,
)

__all__ = [
    "ExperimentReport",
    "FittedConstant",
    "MarginRow",
    "RegimeError",
    "ScenarioConfig",
    "ScenarioError",
    "Verdict",
    "build_boundary",
    "build_field",
    "field_modulus",
]

IDENTITY2 = CoefficientField.identity(2)
UNIT_WEIGHT = CoefficientField.constant(1.0)

# discretization noise allowance, relative to a row's magnitude; rows
# further off than GROSS_FRACTION of their scale are no longer marginal
REL_TOL = 5e-3
GROSS_FRACTION = 0.10
STABILITY_LIMIT = 0.25
# fitted constants below this magnitude are treated as zero when
# judging refinement stability
FIT_FLOOR = 1e-2


class ScenarioError(RuntimeError):
    """A scenario could not be evaluated as configured."""


class RegimeError(ScenarioError):
    """The configured radius lies outside the admissible regime."""

    def __init__(self, message: str, max_radius: float) -> None:
        super().__init__(message)
        self.max_radius = float(max_radius)


class Verdict(Enum):
    CONSISTENT = "Consistent"
    MARGINAL_VIOLATIONS = "MarginalViolations"
    INCONSISTENT = "Inconsistent"
    ALTERNATIVE_ONE = "AlternativeOne"
    HYPOTHESIS_UNMET = "HypothesisUnmet"
    SKIPPED = "Skipped"


@dataclass(frozen=True)
class ScenarioConfig:
    """Immutable description of one scenario run."""

    scenario: str
    field_spec: dict
    boundary_spec: dict
    pair_spec: Optional[dict] = None
    potential_spec: Optional[dict] = None
    n_r: int = 65
    n_theta: int = 128
    r_min: Optional[float] = None
    radii: tuple = (0.9,)
    t_floor: float = 0.02
    n0: float = 2.0
    c1: float = 4.0
    a_log: float = 2.5
    p: float = 4.0
    gamma: float = 0.75
    eps: float = 0.05
    delta: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if not self.scenario:
            raise ValueError("scenario id must be nonempty")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.p < 4.0:
            raise ValueError(f"decay exponent p must be >= 4, got {self.p}")
        if self.n0 <= 0.0 or self.c1 <= 0.0 or self.a_log <= 0.0:
            raise ValueError("n0, c1 and a_log must be positive")
        if self.eps < 0.0 or self.delta < 0.0:
            raise ValueError("eps and delta must be nonnegative")
        if self.n_r < 9 or self.n_theta < 16:
            raise ValueError("grid resolution too small for a scenario run")
        if not self.radii or any(not 0.0 < r < 1.0 for r in self.radii):
            raise ValueError("radius schedule must lie inside (0, 1)")
        if any(a <= b for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("radius schedule must be strictly decreasing")
        if not 0.0 < self.t_floor < 1.0:
            raise ValueError("t_floor must lie in (0, 1)")

    def smallness_warnings(self) -> list:
        out = []
        if self.eps > 0.1:
            out.append(f"eps={self.eps:g} is outside the smallness regime "
                       "(expected <= 0.1)")
        if self.delta > 0.1:
            out.append(f"delta={self.delta:g} is outside the smallness "
                       "regime (expected <= 0.1)")
        if self.gamma <= self.c1 * self.eps:
            out.append(f"gamma={self.gamma:g} does not dominate "
                       f"c1*eps={self.c1 * self.eps:g}")
        if self.n0 < 2.0:
            out.append(f"n0={self.n0:g} is below the large-constant regime")
        return out

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "field_spec": dict(self.field_spec),
            "boundary_spec": dict(self.boundary_spec),
            "pair_spec": dict(self.pair_spec) if self.pair_spec else None,
            "potential_spec": (dict(self.potential_spec)
                               if self.potential_spec else None),
            "n_r": self.n_r,
            "n_theta": self.n_theta,
            "r_min": self.r_min,
            "radii": list(self.radii),
            "t_floor": self.t_floor,
            "n0": self.n0,
            "c1": self.c1,
            "a_log": self.a_log,
            "p": self.p,
            "gamma": self.gamma,
            "eps": self.eps,
            "delta": self.delta,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dc_fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = dict(data)
        if "radii" in kwargs and kwargs["radii"] is not None:
            kwargs["radii"] = tuple(kwargs["radii"])
        return cls(**kwargs)


@dataclass(frozen=True)
class MarginRow:
    """One inequality sample: pass means lhs <= rhs (margin >= 0)."""

    name: str
    radius: float
    lhs: float
    rhs: float
    margin: float
    refined_margin: float

    def to_dict(self) -> dict:
        return {"name": self.name, "radius": self.radius, "lhs": self.lhs,
                "rhs": self.rhs, "margin": self.margin,
                "refined_margin": self.refined_margin}


@dataclass(frozen=True)
class FittedConstant:
    """Smallest constant making an estimate hold, at two resolutions."""

    name: str
    value: float
    refined_value: float

    @property
    def rel_delta(self) -> float:
        scale = max(abs(self.value), abs(self.refined_value))
        if scale <= FIT_FLOOR:
            return 0.0
        return abs(self.refined_value - self.value) / scale

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value,
                "refined_value": self.refined_value,
                "rel_delta": self.rel_delta}


@dataclass
class ExperimentReport:
    scenario: str
    verdict: Verdict
    margins: list
    fitted: dict
    violations: list
    meta: dict
    warnings: list

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "verdict": self.verdict.value,
            "margins": [m.to_dict() for m in self.margins],
            "fitted": {k: v.to_dict() for k, v in self.fitted.items()},
            "violations": list(self.violations),
            "meta": _plain(self.meta),
            "warnings": list(self.warnings),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# -- field and boundary-data builders --------------------------------------


def _modulus_from_spec(spec: dict) -> Modulus:
    kind = spec.get("kind")
    if kind == "linear":
        return Modulus.linear()
    if kind == "power":
        return Modulus.power(float(spec["alpha"]))
    if kind == "log_power":
        return Modulus.log_power(float(spec["p"]))
    raise ValueError(f"unknown modulus kind {kind!r}")


def build_field(spec: dict) -> CoefficientField:
    """Coefficient field from a config dict keyed by 'kind'."""
    kind = spec.get("kind")
    if kind == "identity":
        return CoefficientField.identity(2)
    if kind == "constant":
        return CoefficientField.constant(float(spec.get("value", 1.0)))
    if kind == "diagonal":
        return CoefficientField.diagonal([float(v) for v in spec["entries"]])
    if kind == "affine":
        return CoefficientField.affine(float(spec.get("value", 1.0)),
                                       [float(v) for v in spec["gradient"]])
    if kind == "holder":
        return generate_holder(float(spec["alpha"]), float(spec["amplitude"]),
                               int(spec.get("seed", 0)))
    if kind == "cusp":
        m = _modulus_from_spec(spec["modulus"])
        amp = float(spec["amplitude"])
        if spec.get("isotropic", False):
            return CoefficientField.cusp_isotropic(m, amp)
        return CoefficientField.cusp_anisotropic(m, amp)
    if kind == "bump":
        return CoefficientField.annulus_bump(float(spec["eps"]),
                                             float(spec["r_in"]))
    raise ValueError(f"unknown field kind {kind!r}")


def build_boundary(spec: dict, seed: int) -> Callable:
    """Boundary-data callable on point batches, from a config dict."""
    kind = spec.get("kind")
    if kind == "constant":
        value = float(spec.get("value", 1.0))

        def g_const(pts):
            return np.full(np.asarray(pts).shape[0], value)
        return g_const
    if kind == "harmonic":
        degree = int(spec["degree"])

        def g_harm(pts):
            pts = np.asarray(pts, dtype=float)
            z = pts[..., 0] + 1j * pts[..., 1]
            return np.real(z ** degree)
        return g_harm
    if kind == "mixture":
        terms = [(int(k), float(w)) for k, w in spec["terms"]]

        def g_mix(pts):
            pts = np.asarray(pts, dtype=float)
            z = pts[..., 0] + 1j * pts[..., 1]
            out = np.zeros(pts.shape[:-1])
            for k, w in terms:
                out += w * np.real(z ** k)
            return out
        return g_mix
    if kind == "fourier":
        modes = int(spec.get("modes", 8))
        rng = np.random.default_rng(seed)
        cs = rng.normal(size=modes) / (1.0 + np.arange(modes))
        sn = rng.normal(size=modes) / (1.0 + np.arange(modes))

        def g_fourier(pts):
            pts = np.asarray(pts, dtype=float)
            th = np.arctan2(pts[..., 1], pts[..., 0])
            rr = np.hypot(pts[..., 0], pts[..., 1])
            out = np.zeros(pts.shape[:-1])
            for k in range(modes):
                out += rr ** (k + 1) * (cs[k] * np.cos((k + 1) * th)
                                        + sn[k] * np.sin((k + 1) * th))
            return out
        return g_fourier
    raise ValueError(f"unknown boundary kind {kind!r}")


def field_modulus(f: CoefficientField) -> Modulus:
    """Field's continuity gauge: declared, else a power law from the
    Hölder certificate, else the linear fallback."""
    if f.declared_modulus is not None:
        return f.declared_modulus
    if f.holder is not None:
        return Modulus.power(float(f.holder[0]))
    return Modulus.linear()


def certify_holder(f: CoefficientField) -> Optional[str]:
    """Empirical certificate that a declared Hölder exponent is honest;
    returns a complaint string when the measured exponent falls short."""
    if f.holder is None:
        return None
    em = empirical_modulus(f, 256)
    if em.modulus is None:
        return None
    declared = float(f.holder[0])
    if em.alpha_hat < declared - 0.2:
        return (f"declared Hölder exponent {declared:.3g} not certified "
                f"empirically (measured {em.alpha_hat:.3g})")
    return None


def measured_eps(f: CoefficientField, seed: int = 0x5EED,
                 r_lo: float = 0.0) -> float:
    """Measured sup |a - 1| (isotropic) or sup |A - I| (matrix) on
    sampled points with |x| in (r_lo, 1)."""
    rng = np.random.default_rng(seed)
    th = rng.uniform(0.0, 2.0 * math.pi, size=256)
    rr = rng.uniform(max(r_lo, 1e-3), 1.0, size=256)
    pts = np.column_stack([rr * np.cos(th), rr * np.sin(th)])
    if f.arity is Arity.ISOTROPIC:
        return float(np.max(np.abs(f.evaluate(pts) - 1.0)))
    mats = f.matrices(pts)
    return float(np.max(np.abs(mats - np.eye(2))))


def field_gap(f0: CoefficientField, f1: CoefficientField, r_lo: float,
              seed: int = 0xD1FF) -> float:
    """Measured sup |A_0 - A_1| on sampled points with |x| in (r_lo, 1)."""
    rng = np.random.default_rng(seed)
    th = rng.uniform(0.0, 2.0 * math.pi, size=256)
    rr = rng.uniform(max(r_lo, 1e-3), 0.999, size=256)
    pts = np.column_stack([rr * np.cos(th), rr * np.sin(th)])
    return float(np.max(np.abs(f0.matrices(pts) - f1.matrices(pts))))


# -- solving helpers -------------------------------------------------------


def scenario_grid(cfg: ScenarioConfig) -> PolarGrid:
    return PolarGrid.disk(cfg.n_r, cfg.n_theta, radius=1.0, r_min=cfg.r_min)


def snap(grid: PolarGrid, r: float) -> float:
    return float(grid.radii[grid.nearest_ring(float(r))])


def solve_normalized(f: CoefficientField, grid: PolarGrid, data,
                     top: float, potential=None) -> DiscreteSolution:
    """Solve and rescale so the boundary mean of u^2 at the top radius
    is 1; margins and fitted constants then do not depend on the scale
    of the boundary data."""
    u = solve_dirichlet(f, float(grid.r_out), data, grid,
                        potential=potential)
    ring = u.ring_values(u.grid.nearest_ring(top))
    mean_sq = float(np.mean(ring ** 2))
    if mean_sq <= 0.0:
        raise ScenarioError("boundary data vanishes at the top radius")
    u.values = u.values / math.sqrt(mean_sq)
    u._cache.clear()
    return u


def subsolution(u: DiscreteSolution, f2: CoefficientField, r: float,
                potential=None):
    """Solve with coefficient f2 on the sub-disk of radius r using u's
    trace there; returns (v, v - u restricted to the sub-disk)."""
    grid = u.grid
    i = grid.nearest_ring(r)
    if grid.on_ring(r) is None:
        raise ScenarioError(f"comparison radius {r:.6g} is not a grid ring")
    nt = grid.n_theta
    sub = PolarGrid(grid.radii[:i + 1], nt, "disk")
    v = solve_dirichlet(f2, float(sub.r_out), u.ring_values(i), sub,
                        potential=potential)
    mask = np.concatenate([np.arange((i + 1) * nt),
                           [grid.node_count - 1]])
    return v, v.values - u.values[mask]


def ring_mean_sq(u: DiscreteSolution, ring: int,
                 values: Optional[np.ndarray] = None) -> float:
    nt = u.grid.n_theta
    vals = u.values if values is None else values
    return float(np.mean(vals[ring * nt:(ring + 1) * nt] ** 2))


def frequency_at(u: DiscreteSolution, f: CoefficientField,
                 r: float) -> float:
    return float(almgren_frequency(u, f, [float(r)]).N[0])


def ring_weighted_mean(u: DiscreteSolution, abar: CoefficientField,
                       r: float) -> float:
    """Mean of abar * u^2 over the circle of radius r."""
    return float(boundary_mass_scalar(u, abar, r)) / (2.0 * math.pi)


def doubling_ratio(u: DiscreteSolution, f: CoefficientField,
                   r_hi: float, r_lo: float) -> float:
    """log2 of the boundary-mass ratio per octave of radius; snapped
    ring pairs rarely sit exactly a factor two apart, so the raw log2
    ratio must be normalized by the actual gap."""
    num = math.log2(boundary_mass(u, f, r_hi) / boundary_mass(u, f, r_lo))
    return num / math.log2(r_hi / r_lo)


def sup_gradient(u: DiscreteSolution) -> float:
    """Max nodal gradient magnitude via finite differences on the
    logical (log r, theta) grid."""
    vals = u.values[:u.grid.n_r * u.grid.n_theta].reshape(
        u.grid.n_r, u.grid.n_theta)
    rr = u.grid.radii[:, None]
    dus = np.gradient(vals, u.grid.d_s, axis=0)
    dut = (np.roll(vals, -1, axis=1) - np.roll(vals, 1, axis=1)) \
        / (2.0 * u.grid.d_theta)
    mag = np.hypot(dus / rr, dut / rr)
    return float(mag.max())


# -- margins, fits and verdicts --------------------------------------------


@dataclass
class Evaluation:
    """Raw single-resolution output of a scenario computation."""

    rows: list = dc_field(default_factory=list)
    fits: dict = dc_field(default_factory=dict)
    meta: dict = dc_field(default_factory=dict)

    def add_row(self, name: str, radius: float, lhs: float,
                rhs: float) -> None:
        self.rows.append((name, float(radius), float(lhs), float(rhs)))


@dataclass
class Branch:
    """Early verdict taken before any margins exist."""

    verdict: Verdict
    reason: str
    meta: dict = dc_field(default_factory=dict)


def fit_ratio(deficit: float, scale_e: float,
              noise: float = REL_TOL) -> float:
    """Fitted constant for a deficit expected to be of size scale_e.
    The discretization allowance is deducted first so that zero-signal
    runs fit an exact zero instead of amplified rounding noise."""
    return max(0.0, deficit - noise) / max(scale_e, REL_TOL)


def pair_margins(base: Evaluation, fine: Evaluation) -> list:
    if len(base.rows) != len(fine.rows):
        raise ScenarioError(
            "refined run produced a different margin layout "
            f"({len(base.rows)} vs {len(fine.rows)} rows)")
    out = []
    for (name, radius, lhs, rhs), (fname, _, flhs, frhs) in zip(
            base.rows, fine.rows):
        if fname != name:
            raise ScenarioError(
                f"refined margin {fname!r} does not match {name!r}")
        out.append(MarginRow(name, radius, lhs, rhs, rhs - lhs,
                             frhs - flhs))
    return out


def pair_fits(base: Evaluation, fine: Evaluation) -> dict:
    if set(base.fits) != set(fine.fits):
        raise ScenarioError("refined run produced different fitted names")
    return {name: FittedConstant(name, float(base.fits[name]),
                                 float(fine.fits[name]))
            for name in base.fits}


def decide(margins: Sequence[MarginRow], fitted: dict):
    """Verdict from margins and fit stability.

    A row passes when its margin is no worse than REL_TOL times its own
    scale; failing rows within GROSS_FRACTION of scale are marginal,
    anything worse is inconsistent.  Fit drift beyond STABILITY_LIMIT
    demotes a Consistent run to MarginalViolations.
    """
    violations = []
    gross = False
    for row in margins:
        scale = max(abs(row.lhs), abs(row.rhs), 1e-12)
        if row.margin < -REL_TOL * scale:
            violations.append(
                f"{row.name} at r={row.radius:.4g}: margin "
                f"{row.margin:.3e} (scale {scale:.3e})")
            if row.margin < -GROSS_FRACTION * scale:
                gross = True
    unstable = [fc for fc in fitted.values()
                if fc.rel_delta > STABILITY_LIMIT]
    for fc in unstable:
        violations.append(
            f"fitted {fc.name} moved {100.0 * fc.rel_delta:.1f}% under "
            f"refinement ({fc.value:.4g} -> {fc.refined_value:.4g})")
    if gross:
        return Verdict.INCONSISTENT, violations
    if violations:
        return Verdict.MARGINAL_VIOLATIONS, violations
    return Verdict.CONSISTENT, violations


def paired_report(cfg: ScenarioConfig, evaluate) -> ExperimentReport:
    """Run a scenario computation at the configured resolution and at
    double resolution, pair margins and fits, and assemble the report."""
    warnings = cfg.smallness_warnings()
    grid = scenario_grid(cfg)
    base = evaluate(cfg, grid)
    if isinstance(base, Branch):
        return ExperimentReport(cfg.scenario, base.verdict, [], {},
                                [base.reason], base.meta, warnings)
    fine = evaluate(cfg, grid.refine())
    if isinstance(fine, Branch):
        return ExperimentReport(
            cfg.scenario, fine.verdict, [], {},
            [f"refined run branched: {fine.reason}"],
            {"base": base.meta, "refined": fine.meta}, warnings)
    margins = pair_margins(base, fine)
    fitted = pair_fits(base, fine)
    verdict, violations = decide(margins, fitted)
    meta = dict(base.meta)
    meta["refined"] = fine.meta
    return ExperimentReport(cfg.scenario, verdict, margins, fitted,
                            violations, meta, warnings)
