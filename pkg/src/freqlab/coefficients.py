"""Coefficient fields for divergence-form operators on the unit ball.

A field is either a scalar ``a`` (isotropic) or a symmetric matrix ``A``
(anisotropic), immutable after construction, evaluated in bulk on arrays
of points.  Alongside representation this module computes the two
radial quantities that frequency bookkeeping needs,

    mu(x)   = <A(x) x/|x|, x/|x|>,
    beta(x) = A(x) x / mu(x),

and provides the two field surgeries used throughout: smoothing by a
fixed compactly supported bump (``mollify``), and freezing a scalar
field along rays through the origin (``homogeneous_projection``).

Generators return fields carrying their own construction record, so any
field built here round-trips through ``to_config``/``from_config``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, Mapping, Optional

import numpy as np

from .modulus import Modulus

__all__ = [
    "Arity",
    "CoefficientField",
    "EmpiricalModulus",
    "FieldError",
    "GenerationError",
    "HomogeneousField",
    "beta_vector",
    "empirical_modulus",
    "generate_holder",
    "homogeneous_projection",
    "kernel_gradient_constant",
    "mollify",
    "mu_factor",
    "normalize_at_origin",
]

class FieldError(ValueError):
    """Invalid field construction or evaluation request."""


class GenerationError(FieldError):
    """A synthesized field violated its ellipticity budget."""


class Arity(Enum):
    ISOTROPIC = "isotropic"
    ANISOTROPIC = "anisotropic"


def _as_points(x: Any, n: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != n:
        raise FieldError(f"expected points of dimension {n}, got shape {pts.shape}")
    return pts, single


@dataclass(frozen=True)
class CoefficientField:
    """Scalar or matrix coefficient field on the closed ball of radius
    ``domain_radius``.

    ``evaluator`` maps an (m, n) point array to (m,) scalars or
    (m, n, n) matrices depending on arity.  ``lam`` is the declared
    ellipticity constant: eigenvalues are promised to lie in
    [lam, 1/lam].  ``declared_modulus`` certifies that the oscillation
    of every component over distance t is at most omega(t);
    ``holder`` = (alpha, C_h) certifies oscillation <= C_h * t^alpha.
    Either certificate may be absent.
    """

    arity: Arity
    n: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    lam: float
    declared_modulus: Optional[Modulus] = None
    holder: Optional[tuple[float, float]] = None
    kind: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    domain_radius: float = 1.0
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n not in (2, 3):
            raise FieldError(f"dimension must be 2 or 3, got {self.n}")
        if not 0.0 < self.lam <= 1.0:
            raise FieldError(f"ellipticity constant must lie in (0, 1], got {self.lam}")
        if self.holder is not None:
            alpha, c_h = self.holder
            if not 0.0 < alpha <= 1.0 or c_h < 0.0:
                raise FieldError(f"invalid Holder data {self.holder}")

    @property
    def isotropic(self) -> bool:
        return self.arity is Arity.ISOTROPIC

    def evaluate(self, x: Any) -> np.ndarray:
        """Field values at one point (n,) or a batch (m, n)."""
        pts, single = _as_points(x, self.n)
        r = np.sqrt(np.sum(pts * pts, axis=1))
        rmax = float(r.max(initial=0.0))
        if rmax > self.domain_radius + 1e-9:
            raise FieldError(
                f"point at radius {rmax:.6g} outside evaluation domain "
                f"of radius {self.domain_radius:.6g}"
            )
        out = self.evaluator(pts)
        return out[0] if single else out

    __call__ = evaluate

    def matrices(self, x: Any) -> np.ndarray:
        """Values as full matrices; scalar fields return a(x) * I."""
        pts, single = _as_points(x, self.n)
        vals = self.evaluate(pts)
        if self.arity is Arity.ISOTROPIC:
            vals = vals[:, None, None] * np.eye(self.n)[None, :, :]
        return vals[0] if single else vals

    def origin_value(self) -> np.ndarray:
        return self.evaluate(np.zeros(self.n))

    def origin_normalized(self, tol: float = 1e-12) -> bool:
        v = self.origin_value()
        if self.arity is Arity.ISOTROPIC:
            return abs(float(v) - 1.0) <= tol
        return bool(np.max(np.abs(v - np.eye(self.n))) <= tol)

    def check_symmetry(self, sample_count: int = 64, seed: int = 0,
                       tol: float = 1e-12) -> bool:
        if self.arity is Arity.ISOTROPIC:
            return True
        pts = _ball_sample(sample_count, self.n, self.domain_radius, seed)
        mats = self.evaluate(pts)
        return bool(np.max(np.abs(mats - np.swapaxes(mats, 1, 2))) <= tol)

    def check_ellipticity(self, sample_count: int = 256, seed: int = 0,
                          slack: float = 1e-9) -> bool:
        """Eigenvalues within [lam, 1/lam] on a random sample."""
        pts = _ball_sample(sample_count, self.n, self.domain_radius, seed)
        if self.arity is Arity.ISOTROPIC:
            vals = np.atleast_1d(self.evaluate(pts))
            lo, hi = float(vals.min()), float(vals.max())
        else:
            eig = np.linalg.eigvalsh(self.evaluate(pts))
            lo, hi = float(eig.min()), float(eig.max())
        return lo >= self.lam - slack and hi <= 1.0 / self.lam + slack

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant(cls, value: float = 1.0, n: int = 2) -> "CoefficientField":
        v = float(value)
        if v <= 0.0:
            raise FieldError(f"constant coefficient must be positive, got {v}")
        lam = min(v, 1.0 / v, 1.0)

        def ev(pts: np.ndarray) -> np.ndarray:
            return np.full(pts.shape[0], v)

        return cls(Arity.ISOTROPIC, n, ev, lam, kind="constant",
                   params={"value": v, "n": n})

    @classmethod
    def identity(cls, n: int = 2) -> "CoefficientField":
        eye = np.eye(n)

        def ev(pts: np.ndarray) -> np.ndarray:
            return np.broadcast_to(eye, (pts.shape[0], n, n)).copy()

        return cls(Arity.ANISOTROPIC, n, ev, 1.0, kind="identity",
                   params={"n": n})

    @classmethod
    def diagonal(cls, entries: Any) -> "CoefficientField":
        d = np.asarray(entries, dtype=float)
        n = d.size
        if n not in (2, 3) or np.any(d <= 0.0):
            raise FieldError(f"need 2 or 3 positive diagonal entries, got {entries}")
        lam = float(min(d.min(), 1.0 / d.max(), 1.0))
        mat = np.diag(d)

        def ev(pts: np.ndarray) -> np.ndarray:
            return np.broadcast_to(mat, (pts.shape[0], n, n)).copy()

        return cls(Arity.ANISOTROPIC, n, ev, lam, kind="diag",
                   params={"entries": [float(v) for v in d]})

    @classmethod
    def affine(cls, const: float, gradient: Any, n: int = 2) -> "CoefficientField":
        """Scalar field a(x) = const + <gradient, x>."""
        g = np.asarray(gradient, dtype=float)
        if g.size != n:
            raise FieldError(f"gradient must have {n} entries, got {g.size}")
        gnorm = float(np.linalg.norm(g))
        lo, hi = const - gnorm, const + gnorm
        if lo <= 0.0:
            raise FieldError(f"affine field reaches {lo:.6g} <= 0 on the unit ball")
        lam = min(lo, 1.0 / hi, 1.0)

        def ev(pts: np.ndarray) -> np.ndarray:
            return const + pts @ g

        return cls(Arity.ISOTROPIC, n, ev, lam,
                   holder=(1.0, gnorm) if gnorm > 0 else None,
                   kind="affine",
                   params={"const": float(const),
                           "gradient": [float(v) for v in g], "n": n})

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], *,
                      arity: Arity, n: int, lam: float,
                      declared_modulus: Optional[Modulus] = None,
                      holder: Optional[tuple[float, float]] = None,
                      domain_radius: float = 1.0) -> "CoefficientField":
        """Wrap a vectorized callable.  Not serializable."""
        return cls(arity, n, fn, lam, declared_modulus=declared_modulus,
                   holder=holder, kind="custom", domain_radius=domain_radius)

    @classmethod
    def cusp_isotropic(cls, modulus: Modulus, amplitude: float,
                       anchors: Any = ((0.3, 0.4),),
                       signs: Any = None, n: int = 2) -> "CoefficientField":
        """a(x) = 1 + amplitude * sum_i s_i * omega(|x - p_i|).

        The profile omega is its own modulus of continuity up to a
        factor 2, so amplitudes <= 0.5 / len(anchors) keep the field
        within the unit-constant certificate carried in
        ``declared_modulus``.
        """
        pts_anchor = np.asarray(anchors, dtype=float)
        if pts_anchor.ndim != 2 or pts_anchor.shape[1] != n:
            raise FieldError(f"anchors must be (k, {n}), got {pts_anchor.shape}")
        k = pts_anchor.shape[0]
        sgn = np.ones(k) if signs is None else np.asarray(signs, dtype=float)
        if sgn.size != k:
            raise FieldError("one sign per anchor required")
        amp = float(amplitude)
        if not 0.0 <= amp <= 0.5 / k:
            raise FieldError(
                f"amplitude must lie in [0, {0.5 / k:.3g}] for {k} anchors")
        cap = float(modulus.omega(1.0))
        worst = 1.0 + amp * k * cap
        best = 1.0 - amp * k * cap
        lam = min(best, 1.0 / worst)

        def ev(pts: np.ndarray) -> np.ndarray:
            out = np.ones(pts.shape[0])
            for i in range(k):
                d = np.sqrt(np.sum((pts - pts_anchor[i]) ** 2, axis=1))
                prof = np.zeros_like(d)
                pos = d > 0.0
                prof[pos] = modulus.omega(np.minimum(d[pos], 1.0))
                out += amp * sgn[i] * prof
            return out

        return cls(Arity.ISOTROPIC, n, ev, lam, declared_modulus=modulus,
                   kind="cusp_iso",
                   params={"modulus": modulus.to_config(), "amplitude": amp,
                           "anchors": pts_anchor.tolist(),
                           "signs": sgn.tolist(), "n": n})

    @classmethod
    def cusp_anisotropic(cls, modulus: Modulus, amplitude: float,
                         anchors: Any = ((0.3, 0.4), (-0.5, 0.1)),
                         n: int = 2) -> "CoefficientField":
        """I plus cusp profiles on the traceless symmetric directions.

        Two anchors drive the two off-trace matrix directions in 2D;
        eigenvalues stay within 1 +- amplitude * sqrt(2) * omega(1).
        """
        if n != 2:
            raise FieldError("anisotropic cusp generator is 2-dimensional")
        pts_anchor = np.asarray(anchors, dtype=float)
        if pts_anchor.shape != (2, 2):
            raise FieldError("exactly two anchors of dimension 2 required")
        amp = float(amplitude)
        cap = float(modulus.omega(1.0))
        spread = amp * math.sqrt(2.0) * cap
        if not 0.0 <= spread < 0.5:
            raise FieldError(f"amplitude {amp} pushes eigenvalues past 1/2")
        lam = min(1.0 - spread, 1.0 / (1.0 + spread))
        e1 = np.array([[1.0, 0.0], [0.0, -1.0]])
        e2 = np.array([[0.0, 1.0], [1.0, 0.0]])

        def profile(pts: np.ndarray, anchor: np.ndarray) -> np.ndarray:
            d = np.sqrt(np.sum((pts - anchor) ** 2, axis=1))
            prof = np.zeros_like(d)
            pos = d > 0.0
            prof[pos] = modulus.omega(np.minimum(d[pos], 1.0))
            return prof

        def ev(pts: np.ndarray) -> np.ndarray:
            c1 = profile(pts, pts_anchor[0])
            c2 = profile(pts, pts_anchor[1])
            out = np.broadcast_to(np.eye(2), (pts.shape[0], 2, 2)).copy()
            out += amp * (c1[:, None, None] * e1 + c2[:, None, None] * e2)
            return out

        return cls(Arity.ANISOTROPIC, n, ev, lam, declared_modulus=modulus,
                   kind="cusp_aniso",
                   params={"modulus": modulus.to_config(), "amplitude": amp,
                           "anchors": pts_anchor.tolist(), "n": n})

    @classmethod
    def annulus_bump(cls, eps: float, r_in: float, n: int = 2) -> "CoefficientField":
        """a = 1 + eps * smooth radial bump supported in r_in < |x| < 1."""
        e, ri = float(eps), float(r_in)
        if not 0.0 < ri < 1.0:
            raise FieldError(f"inner radius must lie in (0, 1), got {ri}")
        if not 1.0 + e > 0.0:
            raise FieldError(f"bump height {e} destroys positivity")
        mid, half = 0.5 * (1.0 + ri), 0.5 * (1.0 - ri)
        lo, hi = min(1.0, 1.0 + e), max(1.0, 1.0 + e)
        lam = min(lo, 1.0 / hi)

        def ev(pts: np.ndarray) -> np.ndarray:
            r = np.sqrt(np.sum(pts * pts, axis=1))
            s = (r - mid) / half
            out = np.ones(pts.shape[0])
            inside = np.abs(s) < 1.0
            out[inside] += e * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
            return out

        return cls(Arity.ISOTROPIC, n, ev, lam, kind="annulus_bump",
                   params={"eps": e, "r_in": ri, "n": n})

    # -- serialization --------------------------------------------------

    def to_config(self) -> dict:
        if self.kind == "custom":
            raise FieldError("fields wrapping raw callables are not serializable")
        cfg: dict = {"arity": self.arity.value, "kind": self.kind,
                     "params": _jsonify(self.params)}
        if self.seed is not None:
            cfg["seed"] = int(self.seed)
        return cfg

    @staticmethod
    def from_config(cfg: Mapping[str, Any]) -> "CoefficientField":
        kind = cfg.get("kind")
        params = dict(cfg.get("params", {}))
        if kind == "constant":
            return CoefficientField.constant(params["value"], params.get("n", 2))
        if kind == "identity":
            return CoefficientField.identity(params.get("n", 2))
        if kind == "diag":
            return CoefficientField.diagonal(params["entries"])
        if kind == "affine":
            return CoefficientField.affine(params["const"], params["gradient"],
                                           params.get("n", 2))
        if kind == "cusp_iso":
            return CoefficientField.cusp_isotropic(
                Modulus.from_config(params["modulus"]), params["amplitude"],
                params["anchors"], params.get("signs"), params.get("n", 2))
        if kind == "cusp_aniso":
            return CoefficientField.cusp_anisotropic(
                Modulus.from_config(params["modulus"]), params["amplitude"],
                params["anchors"], params.get("n", 2))
        if kind == "annulus_bump":
            return CoefficientField.annulus_bump(params["eps"], params["r_in"],
                                                 params.get("n", 2))
        if kind == "holder_synthetic":
            return generate_holder(params["alpha"], params["amplitude"],
                                   cfg.get("seed", 0), params.get("n", 2))
        if kind == "mollified":
            return mollify(CoefficientField.from_config(params["base"]),
                           params["eps"])
        if kind == "homogeneous":
            return homogeneous_projection(
                CoefficientField.from_config(params["base"]),
                params["anchor_radius"])
        if kind == "normalized":
            return normalize_at_origin(CoefficientField.from_config(params["base"]))
        raise FieldError(f"unknown field kind {kind!r}")


@dataclass(frozen=True)
class HomogeneousField(CoefficientField):
    """Field constant along rays: value(x) = base(anchor * x/|x|).

    At the origin, where rays meet, the evaluator returns the angular
    mean over the anchor sphere; every other point is exact.
    """

    base: Optional[CoefficientField] = None
    anchor_radius: float = 0.0


def _jsonify(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _ball_sample(count: int, n: int, radius: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return v * r[:, None]


# -- mu and beta --------------------------------------------------------


def mu_factor(f: CoefficientField, x: Any) -> np.ndarray:
    """Radial quadratic form <A(x) x/|x|, x/|x|>; equals a(x) for scalars."""
    pts, single = _as_points(x, f.n)
    r = np.sqrt(np.sum(pts * pts, axis=1))
    if np.any(r == 0.0):
        raise FieldError("mu is undefined at the origin")
    if f.arity is Arity.ISOTROPIC:
        out = np.atleast_1d(f.evaluate(pts))
    else:
        nu = pts / r[:, None]
        mats = f.evaluate(pts)
        out = np.einsum("mi,mij,mj->m", nu, mats, nu)
    return float(out[0]) if single else out


def beta_vector(f: CoefficientField, x: Any) -> np.ndarray:
    """A(x) x / mu(x); its radial component equals |x| identically."""
    pts, single = _as_points(x, f.n)
    r = np.sqrt(np.sum(pts * pts, axis=1))
    if np.any(r == 0.0):
        raise FieldError("beta is undefined at the origin")
    if f.arity is Arity.ISOTROPIC:
        out = pts.copy()
    else:
        mats = f.evaluate(pts)
        ax = np.einsum("mij,mj->mi", mats, pts)
        nu = pts / r[:, None]
        mu = np.einsum("mi,mij,mj->m", nu, mats, nu)
        out = ax / mu[:, None]
    return out[0] if single else out


# -- mollification ------------------------------------------------------

_KERNEL_POINTS_PER_AXIS = 64


@lru_cache(maxsize=8)
def _kernel_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint offsets on the unit cube and unit-sum bump weights."""
    m = _KERNEL_POINTS_PER_AXIS
    centers = -1.0 + (2.0 * np.arange(m) + 1.0) / m
    axes = np.meshgrid(*([centers] * n), indexing="ij")
    offsets = np.stack([a.ravel() for a in axes], axis=1)
    r2 = np.sum(offsets * offsets, axis=1)
    w = np.zeros(offsets.shape[0])
    inside = r2 < 1.0
    w[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    keep = w > 0.0
    return offsets[keep], w[keep] / w[keep].sum()


@lru_cache(maxsize=8)
def kernel_gradient_constant(n: int) -> float:
    """Integral of |grad eta| for the unit-mass bump, by midpoint rule.

    This is the constant in the mollifier gradient bound
    sup |grad f_eps| <= C * omega(eps) / eps.
    """
    m = 1024 if n == 2 else 160
    centers = -1.0 + (2.0 * np.arange(m) + 1.0) / m
    cell = (2.0 / m) ** n
    axes = np.meshgrid(*([centers] * n), indexing="ij")
    r2 = sum(a * a for a in axes)
    inside = r2 < 1.0
    vals = np.zeros_like(r2)
    vals[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    mass = vals.sum() * cell
    grad = np.zeros_like(r2)
    r = np.sqrt(r2[inside])
    grad[inside] = vals[inside] * 2.0 * r / (1.0 - r2[inside]) ** 2
    return float(grad.sum() * cell / mass)


def mollify(f: CoefficientField, eps: float) -> CoefficientField:
    """Convolve componentwise with the fixed bump at scale eps.

    Values come from a tensor midpoint rule with 64^n kernel samples;
    the discrete weights form a convex combination, so the output
    oscillates no more than the input and reproduces constants and
    affine entries exactly.  Evaluation is restricted to the ball of
    radius domain_radius - eps.  When the input carries a modulus or
    Holder certificate, ``meta`` records the implied sup-distance bound
    omega(eps) and gradient bound C * omega(eps) / eps.
    """
    e = float(eps)
    if not 0.0 < e < 1.0:
        raise FieldError(f"mollification scale must lie in (0, 1), got {e}")
    if e >= f.domain_radius:
        raise FieldError(
            f"scale {e} leaves no evaluation domain inside radius {f.domain_radius}")
    offsets, weights = _kernel_table(f.n)
    shifted = e * offsets
    radius = f.domain_radius - e
    k = weights.size
    budget = 2 ** 21 if f.arity is Arity.ISOTROPIC else 2 ** 19
    chunk = max(1, budget // k)
    base_ev = f.evaluator
    aniso = f.arity is Arity.ANISOTROPIC
    nn = f.n

    def ev(pts: np.ndarray) -> np.ndarray:
        r = np.sqrt(np.sum(pts * pts, axis=1))
        rmax = float(r.max(initial=0.0))
        if rmax > radius + 1e-9:
            raise FieldError(
                f"point at radius {rmax:.6g} outside mollified domain "
                f"of radius {radius:.6g}")
        m = pts.shape[0]
        out = np.empty((m, nn, nn)) if aniso else np.empty(m)
        for lo in range(0, m, chunk):
            hi = min(lo + chunk, m)
            block = pts[lo:hi, None, :] - shifted[None, :, :]
            vals = base_ev(block.reshape(-1, nn))
            if aniso:
                vals = vals.reshape(hi - lo, k, nn, nn)
                out[lo:hi] = np.einsum("mkij,k->mij", vals, weights)
            else:
                out[lo:hi] = vals.reshape(hi - lo, k) @ weights
        return out

    if f.declared_modulus is not None:
        sup_bound = float(f.declared_modulus.omega(min(e, 1.0)))
    elif f.holder is not None:
        alpha, c_h = f.holder
        sup_bound = c_h * e ** alpha
    else:
        sup_bound = None
    grad_const = kernel_gradient_constant(f.n)
    meta = {"eps": e, "kernel_grad_l1": grad_const}
    if sup_bound is not None:
        meta["sup_distance_bound"] = sup_bound
        meta["gradient_sup_bound"] = grad_const * sup_bound / e

    params: dict[str, Any] = {"eps": e}
    kind = "mollified"
    if f.kind != "custom":
        params["base"] = f.to_config()
    else:
        kind = "custom"
    return CoefficientField(
        f.arity, f.n, ev, f.lam,
        declared_modulus=f.declared_modulus, holder=f.holder,
        kind=kind, params=params, seed=f.seed,
        domain_radius=radius, meta=meta)


# -- homogeneous projection ---------------------------------------------


def homogeneous_projection(f: CoefficientField, r: float) -> HomogeneousField:
    """Freeze a scalar field along rays: abar(x) = a(r * x/|x|).

    Only scalar fields are supported; the ray-freezing construction has
    no canonical matrix analogue here.  Projecting twice is pointwise
    idempotent since the output depends on direction alone.
    """
    if f.arity is not Arity.ISOTROPIC:
        raise FieldError("homogeneous projection is defined for scalar fields only")
    anchor = float(r)
    if not 0.0 < anchor <= f.domain_radius:
        raise FieldError(
            f"anchor radius must lie in (0, {f.domain_radius}], got {anchor}")
    base_ev = f.evaluator
    nn = f.n

    if nn == 2:
        theta = 2.0 * np.pi * (np.arange(512) + 0.5) / 512
        ring = anchor * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    else:
        # Fibonacci sphere: near-uniform directions for the mean at 0
        i = np.arange(512) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / 512)
        golden = np.pi * (1.0 + math.sqrt(5.0))
        ring = anchor * np.stack(
            [np.cos(golden * i) * np.sin(phi),
             np.sin(golden * i) * np.sin(phi), np.cos(phi)], axis=1)
    center_value = float(np.mean(base_ev(ring)))

    def ev(pts: np.ndarray) -> np.ndarray:
        r_pts = np.sqrt(np.sum(pts * pts, axis=1))
        out = np.full(pts.shape[0], center_value)
        pos = r_pts > 0.0
        if np.any(pos):
            proj = anchor * pts[pos] / r_pts[pos, None]
            out[pos] = base_ev(proj)
        return out

    params: dict[str, Any] = {"anchor_radius": anchor}
    kind = "homogeneous"
    if f.kind != "custom":
        params["base"] = f.to_config()
    else:
        kind = "custom"
    return HomogeneousField(
        Arity.ISOTROPIC, nn, ev, f.lam,
        declared_modulus=f.declared_modulus, holder=f.holder,
        kind=kind, params=params, seed=f.seed,
        domain_radius=1.0, meta={"anchor_radius": anchor},
        base=f, anchor_radius=anchor)


def normalize_at_origin(f: CoefficientField) -> CoefficientField:
    """Divide out the origin value so a(0) = 1 (resp. A(0) = I).

    Matrix fields must already have A(0) proportional to I; a general
    origin value would require a change of variables, which this
    laboratory does not perform.  Dividing by c < 1 inflates
    oscillation, so certificates are rescaled (Holder) or dropped
    (modulus) as needed.
    """
    v = f.origin_value()
    if f.arity is Arity.ISOTROPIC:
        c = float(v)
    else:
        diag = float(np.trace(v)) / f.n
        if np.max(np.abs(v - diag * np.eye(f.n))) > 1e-12:
            raise FieldError(
                "origin value is not a multiple of the identity; "
                "normalize via an explicit change of variables instead")
        c = diag
    if c <= 0.0:
        raise FieldError(f"origin value {c:.6g} is not positive")
    if abs(c - 1.0) <= 1e-15:
        return f
    base_ev = f.evaluator
    scale = 1.0 / c

    def ev(pts: np.ndarray) -> np.ndarray:
        return scale * base_ev(pts)

    lo, hi = f.lam * scale, scale / f.lam
    lam = min(lo, 1.0 / hi, 1.0)
    holder = None
    if f.holder is not None:
        holder = (f.holder[0], f.holder[1] * scale)
    modulus = f.declared_modulus if c >= 1.0 else None
    params: dict[str, Any] = {}
    kind = "normalized"
    if f.kind != "custom":
        params["base"] = f.to_config()
    else:
        kind = "custom"
    return CoefficientField(
        f.arity, f.n, ev, lam, declared_modulus=modulus, holder=holder,
        kind=kind, params=params, seed=f.seed,
        domain_radius=f.domain_radius, meta={"origin_scale": c})


# -- empirical regularity -----------------------------------------------


@dataclass(frozen=True)
class EmpiricalModulus:
    """Measured oscillation per dyadic separation with a power-law fit.

    ``modulus`` is a tabulated modulus built from the concave
    nondecreasing envelope of the measurements, or None when the field
    shows no oscillation at all.
    """

    separations: np.ndarray
    oscillations: np.ndarray
    alpha_hat: float
    c_h_hat: float
    modulus: Optional[Modulus]
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "separations": [float(v) for v in self.separations],
            "oscillations": [float(v) for v in self.oscillations],
            "alpha_hat": float(self.alpha_hat),
            "c_h_hat": float(self.c_h_hat),
            "sample_count": int(self.sample_count),
        }


def _concave_envelope(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least concave majorant values at the data abscissae."""
    hull_x: list[float] = []
    hull_y: list[float] = []
    for xi, yi in zip(t, y):
        hull_x.append(float(xi))
        hull_y.append(float(yi))
        # upper hull: pop while the middle point lies below the chord
        while len(hull_x) >= 3:
            x0, x1, x2 = hull_x[-3], hull_x[-2], hull_x[-1]
            y0, y1, y2 = hull_y[-3], hull_y[-2], hull_y[-1]
            if (y1 - y0) * (x2 - x1) >= (y2 - y1) * (x1 - x0):
                break
            del hull_x[-2], hull_y[-2]
    return np.interp(t, hull_x, hull_y)


def empirical_modulus(f: CoefficientField, sample_count: int,
                      depth: int = 9) -> EmpiricalModulus:
    """Max oscillation over random point pairs at dyadic separations.

    Fits log(oscillation) against log(separation) to estimate a Holder
    pair (alpha_hat, C_h_hat) and tabulates the concave envelope as a
    reusable modulus.  Sampling is deterministic.
    """
    if sample_count < 100:
        raise FieldError(f"need at least 100 samples, got {sample_count}")
    if depth < 2:
        raise FieldError(f"need at least 2 separation scales, got {depth}")
    rng = np.random.default_rng(0xE11)
    seps = 2.0 ** -np.arange(1, depth + 1)
    seps = seps[seps < 0.5 * f.domain_radius]
    if seps.size < 2:
        raise FieldError("evaluation domain too small for two dyadic scales")
    osc = np.zeros(seps.size)
    for j, d in enumerate(seps):
        reach = f.domain_radius - d
        v = rng.standard_normal((sample_count, f.n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        base = _ball_sample(sample_count, f.n, reach, int(rng.integers(2 ** 31)))
        a0 = f.evaluate(base)
        a1 = f.evaluate(base + d * v)
        diff = np.abs(a1 - a0)
        if f.arity is Arity.ANISOTROPIC:
            diff = diff.reshape(sample_count, -1).max(axis=1)
        osc[j] = float(diff.max())

    positive = osc > 0.0
    if positive.sum() < 2:
        return EmpiricalModulus(seps, osc, 1.0, 0.0, None, sample_count)
    slope, intercept = np.polyfit(np.log(seps[positive]),
                                  np.log(osc[positive]), 1)
    alpha_hat = float(slope)
    c_h_hat = float(math.exp(intercept))

    tab_mod: Optional[Modulus] = None
    if bool(positive.all()):
        order = np.argsort(seps)
        t_sorted = seps[order]
        y_sorted = np.maximum.accumulate(osc[order])
        y_env = _concave_envelope(t_sorted, y_sorted)
        tab_mod = Modulus.tabulated(t_sorted, y_env)
    return EmpiricalModulus(seps, osc, alpha_hat, c_h_hat, tab_mod, sample_count)


# -- random Holder fields -----------------------------------------------

_HOLDER_GRID = {2: 1024, 3: 128}


def generate_holder(alpha: float, amplitude: float, seed: int,
                    n: int = 2) -> CoefficientField:
    """Random scalar field with target Holder exponent alpha.

    Synthesis is spectral: white noise on a periodic grid is shaped so
    the mode at frequency k carries amplitude proportional to
    |k|^(-alpha - n/2), the scaling whose realizations oscillate like
    d^alpha at separation d.  The centered sample is normalized to unit
    sup on the grid, scaled by ``amplitude``, and pinned to a(0) = 1.
    Fields leaving [1/2, 2] raise GenerationError.
    """
    a = float(alpha)
    if not 0.0 < a < 1.0:
        raise FieldError(f"target exponent must lie in (0, 1), got {a}")
    amp = float(amplitude)
    if amp < 0.0:
        raise FieldError(f"amplitude must be nonnegative, got {amp}")
    if n not in (2, 3):
        raise FieldError(f"dimension must be 2 or 3, got {n}")
    if amp == 0.0:
        f = CoefficientField.constant(1.0, n)
        return CoefficientField(
            Arity.ISOTROPIC, n, f.evaluator, 1.0, holder=(a, 0.0),
            kind="holder_synthetic",
            params={"alpha": a, "amplitude": 0.0, "n": n}, seed=int(seed))

    m = _HOLDER_GRID[n]
    rng = np.random.default_rng(int(seed))
    noise = rng.standard_normal((m,) * n)
    freq = np.fft.fftfreq(m, d=1.0 / m)
    mesh = np.meshgrid(*([freq] * n), indexing="ij")
    kmag = np.sqrt(sum(g * g for g in mesh))
    shape = np.zeros_like(kmag)
    nonzero = kmag > 0.0
    shape[nonzero] = kmag[nonzero] ** (-a - 0.5 * n)
    sample = np.fft.ifftn(np.fft.fftn(noise) * shape).real

    # grid covers [-1, 1) per axis; index m//2 is the origin
    axes = [-1.0 + 2.0 * np.arange(m) / m for _ in range(n)]
    origin = (m // 2,) * n
    sample = sample - sample[origin]
    peak = float(np.abs(sample).max())
    values = 1.0 + amp * sample / peak

    lo, hi = float(values.min()), float(values.max())
    if lo < 0.5 or hi > 2.0:
        raise GenerationError(
            f"synthesized range [{lo:.4g}, {hi:.4g}] leaves [0.5, 2]; "
            f"reduce amplitude {amp}")

    # wrap one periodic row per axis so the closed ball is covered
    ext_axes = [np.append(ax, 1.0) for ax in axes]
    ext = values
    for axis in range(n):
        first = np.take(ext, [0], axis=axis)
        ext = np.concatenate([ext, first], axis=axis)

    if n == 2:
        from scipy.interpolate import RectBivariateSpline

        spline = RectBivariateSpline(ext_axes[0], ext_axes[1], ext, kx=3, ky=3)

        def ev(pts: np.ndarray) -> np.ndarray:
            return spline.ev(pts[:, 0], pts[:, 1])
    else:
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(tuple(ext_axes), ext, method="linear")

        def ev(pts: np.ndarray) -> np.ndarray:
            return interp(pts)

    # Holder constant certificate from axis-aligned grid lags
    h = 2.0 / m
    c_h = 0.0
    for axis in range(n):
        for lag in (1, 2, 4, 8, 16):
            d = np.abs(values - np.roll(values, lag, axis=axis))
            c_h = max(c_h, float(d.max()) / (lag * h) ** a)

    return CoefficientField(
        Arity.ISOTROPIC, n, ev, 0.5, holder=(a, c_h),
        kind="holder_synthetic",
        params={"alpha": a, "amplitude": amp, "n": n}, seed=int(seed),
        meta={"grid": m, "range": (lo, hi)})
