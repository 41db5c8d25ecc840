"""Dirichlet solver for -div(A grad u) = 0 on disks and annuli.

The grid is polar with geometrically spaced radii, so in the logical
coordinates (s, theta) = (log r, theta) the cells form a uniform
rectangular lattice and every circle of grid radius is a grid line.  In
two dimensions the conformal factor cancels from the energy, leaving

    int <A grad u, grad u> dx = int <B g, g> ds dtheta,
    B(s, theta) = Q(theta)^T A(x) Q(theta),

with Q the rotation to the radial/tangential frame, so B inherits the
symmetry and eigenvalue bounds of A.  On each logical cell the discrete
energy uses the bilinear interpolant with the coefficient sampled at
the four face midpoints (one sample per control surface), which keeps
the assembled operator symmetric positive definite, reproduces affine
solutions, and is second-order accurate for full tensors.  The disk of
radius r_min around the origin is a single fan of linear triangles
sharing one origin unknown, coupling the core to the first ring without
regularizing the equation.

Energy and boundary-mass functionals are evaluated in the same
quadrature as the assembly, so the divergence-theorem identity
D(r) = int_{boundary} u <A grad u, nu> holds discretely to roundoff at
every grid radius.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import LinearOperator, cg, splu

from .coefficients import Arity, CoefficientField, FieldError, mu_factor

__all__ = [
    "DiscreteSolution",
    "PolarGrid",
    "SolverError",
    "boundary_mass",
    "boundary_mass_scalar",
    "clear_operator_cache",
    "dirichlet_energy",
    "dirichlet_energy_flux",
    "gradient_mean_square",
    "ring_summary",
    "ring_trace",
    "solve_dirichlet",
    "volume_mean_square",
    "weighted_gradient_energy",
]


class SolverError(RuntimeError):
    """Linear solve failed to converge or the grid cannot host the problem."""


# -- grids ---------------------------------------------------------------


@dataclass(frozen=True)
class PolarGrid:
    """Structured polar grid: geometric radii, equispaced angles.

    ``radii`` ascend; node (i, j) sits at radius radii[i], angle
    2 pi j / n_theta.  Disk grids carry one extra origin node closing
    the hole below radii[0].
    """

    radii: np.ndarray
    n_theta: int
    kind: str = "disk"

    def __post_init__(self) -> None:
        r = np.asarray(self.radii, dtype=float)
        object.__setattr__(self, "radii", r)
        if r.ndim != 1 or r.size < 2:
            raise ValueError("need at least two grid radii")
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValueError("radii must be positive and strictly increasing")
        if self.n_theta < 8:
            raise ValueError(f"need at least 8 angles, got {self.n_theta}")
        if self.kind not in ("disk", "annulus"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        s = np.log(r)
        steps = np.diff(s)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise ValueError("radii must form a geometric progression")

    @classmethod
    def disk(cls, n_r: int, n_theta: int, radius: float = 1.0,
             r_min: Optional[float] = None) -> "PolarGrid":
        """Disk grid; without an explicit r_min the radial step equals
        the angular step, so cells are logically square."""
        if n_r < 2:
            raise ValueError("need at least two rings")
        if r_min is None:
            r_min = radius * math.exp(-2.0 * math.pi * (n_r - 1) / n_theta)
        if not 0.0 < r_min < radius:
            raise ValueError(f"inner radius {r_min} outside (0, {radius})")
        s = np.linspace(math.log(r_min), math.log(radius), n_r)
        return cls(np.exp(s), n_theta, "disk")

    @classmethod
    def annulus(cls, r_in: float, r_out: float, n_r: int,
                n_theta: int) -> "PolarGrid":
        if not 0.0 < r_in < r_out:
            raise ValueError(f"need 0 < r_in < r_out, got {r_in}, {r_out}")
        s = np.linspace(math.log(r_in), math.log(r_out), n_r)
        return cls(np.exp(s), n_theta, "annulus")

    @property
    def n_r(self) -> int:
        return self.radii.size

    @property
    def r_in(self) -> float:
        return float(self.radii[0])

    @property
    def r_out(self) -> float:
        return float(self.radii[-1])

    @property
    def d_s(self) -> float:
        return float(math.log(self.radii[1] / self.radii[0]))

    @property
    def d_theta(self) -> float:
        return 2.0 * math.pi / self.n_theta

    @property
    def theta(self) -> np.ndarray:
        return self.d_theta * np.arange(self.n_theta)

    @property
    def node_count(self) -> int:
        extra = 1 if self.kind == "disk" else 0
        return self.n_r * self.n_theta + extra

    def node_index(self, i: int, j: int) -> int:
        return i * self.n_theta + (j % self.n_theta)

    def ring_points(self, i: int) -> np.ndarray:
        th = self.theta
        return self.radii[i] * np.stack([np.cos(th), np.sin(th)], axis=1)

    def nearest_ring(self, r: float) -> int:
        if not self.radii[0] * (1 - 1e-9) <= r <= self.radii[-1] * (1 + 1e-9):
            raise ValueError(
                f"radius {r} outside grid range "
                f"[{self.radii[0]:.6g}, {self.radii[-1]:.6g}]")
        return int(np.argmin(np.abs(np.log(self.radii) - math.log(r))))

    def on_ring(self, r: float, rel_tol: float = 1e-9) -> Optional[int]:
        i = self.nearest_ring(r)
        if abs(math.log(r / self.radii[i])) <= rel_tol:
            return i
        return None

    def refine(self, factor: int = 2) -> "PolarGrid":
        """Halve both mesh widths; existing ring radii are preserved."""
        if factor < 2:
            return self
        n_r = factor * (self.n_r - 1) + 1
        s = np.linspace(math.log(self.r_in), math.log(self.r_out), n_r)
        return PolarGrid(np.exp(s), factor * self.n_theta, self.kind)

    def key(self) -> tuple:
        return (self.kind, self.n_r, self.n_theta,
                self.radii[0].hex(), self.radii[-1].hex())


# -- assembly ------------------------------------------------------------

# gradient rows of the bilinear basis at the four face midpoints of the
# reference cell, local node order (i,j), (i+1,j), (i+1,j+1), (i,j+1)
_GRAD_ROWS = np.array([
    [[-0.5, 0.5, 0.5, -0.5], [-1.0, 0.0, 0.0, 1.0]],   # inner ring face
    [[-0.5, 0.5, 0.5, -0.5], [0.0, -1.0, 1.0, 0.0]],   # outer ring face
    [[-1.0, 1.0, 0.0, 0.0], [-0.5, -0.5, 0.5, 0.5]],   # first spoke face
    [[0.0, 0.0, 1.0, -1.0], [-0.5, -0.5, 0.5, 0.5]],   # second spoke face
])
# basis values at the same four points, for mass integrals
_BASIS_ROWS = np.array([
    [0.5, 0.0, 0.0, 0.5],
    [0.0, 0.5, 0.5, 0.0],
    [0.5, 0.5, 0.0, 0.0],
    [0.0, 0.0, 0.5, 0.5],
])
_TRI_BASIS = np.array([
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
])


def _rotated_tensor(f: CoefficientField, r: np.ndarray,
                    th: np.ndarray) -> np.ndarray:
    """B = Q^T A Q at the given polar points, (m, 2, 2)."""
    pts = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    if f.arity is Arity.ISOTROPIC:
        a = f.evaluate(pts)
        out = np.zeros(a.shape + (2, 2))
        out[..., 0, 0] = a
        out[..., 1, 1] = a
        return out
    mats = f.evaluate(pts)
    c, s = np.cos(th), np.sin(th)
    q = np.empty(th.shape + (2, 2))
    q[..., 0, 0] = c
    q[..., 0, 1] = -s
    q[..., 1, 0] = s
    q[..., 1, 1] = c
    return np.einsum("...ji,...jk,...kl->...il", q, mats, q)


def _check_elliptic(b: np.ndarray, where: str) -> None:
    sym_gap = float(np.max(np.abs(b[..., 0, 1] - b[..., 1, 0])))
    if sym_gap > 1e-10:
        raise FieldError(f"coefficient matrix asymmetric by {sym_gap:.3g} {where}")
    half_tr = 0.5 * (b[..., 0, 0] + b[..., 1, 1])
    disc = np.sqrt(0.25 * (b[..., 0, 0] - b[..., 1, 1]) ** 2
                   + b[..., 0, 1] ** 2)
    lo = float(np.min(half_tr - disc))
    if lo <= 0.0:
        raise FieldError(f"ellipticity violated: eigenvalue {lo:.3g} {where}")


class _Assembly:
    """Cell matrices, assembled operator, and quadrature tables for one
    (grid, field, potential) triple."""

    def __init__(self, grid: PolarGrid, f: CoefficientField,
                 potential: Optional[Callable[[np.ndarray], np.ndarray]]):
        if f.n != 2:
            raise NotImplementedError(
                "only the two-dimensional solver is implemented")
        self.grid = grid
        n_r, n_t = grid.n_r, grid.n_theta
        h, k = grid.d_s, grid.d_theta
        s = np.log(grid.radii)
        th = grid.theta
        w = h * k / 4.0

        grads = _GRAD_ROWS.copy()
        grads[:, 0, :] /= h
        grads[:, 1, :] /= k

        # shared face samples: ring faces at (r_i, theta_{j+1/2}),
        # spoke faces at (r_{i+1/2}, theta_j)
        th_mid = th + 0.5 * k
        rf = _rotated_tensor(
            f, np.repeat(grid.radii, n_t), np.tile(th_mid, n_r)
        ).reshape(n_r, n_t, 2, 2)
        r_mid = np.exp(s[:-1] + 0.5 * h)
        sf = _rotated_tensor(
            f, np.repeat(r_mid, n_t), np.tile(th, n_r - 1)
        ).reshape(n_r - 1, n_t, 2, 2)
        _check_elliptic(rf, "at a ring face")
        _check_elliptic(sf, "at a spoke face")

        n_band = n_r - 1
        jj = np.arange(n_t)
        jp = (jj + 1) % n_t
        b_q = [rf[:-1], rf[1:], sf, np.take(sf, jp, axis=1)]
        kc = w * sum(
            np.einsum("im,btij,jn->btmn",
                      grads[q], b_q[q], grads[q],
                      optimize=True)
            for q in range(4)
        )
        self.cell_k = kc
        self.quad_b = b_q
        self.quad_g = grads
        self.quad_w = w

        ii = np.arange(n_band)
        base = (ii[:, None] * n_t + jj[None, :])
        self.cell_nodes = np.stack(
            [base, base + n_t,
             ii[:, None] * n_t + n_t + jp[None, :],
             ii[:, None] * n_t + jp[None, :]], axis=-1)

        # volume quadrature: weight w * r^2 at each face midpoint
        r2 = np.empty((n_band, n_t, 4))
        r2[..., 0] = (grid.radii[:-1] ** 2)[:, None]
        r2[..., 1] = (grid.radii[1:] ** 2)[:, None]
        r2[..., 2] = (r_mid ** 2)[:, None]
        r2[..., 3] = (r_mid ** 2)[:, None]
        self.cell_volw = w * r2

        quad_pts = None
        if potential is not None:
            rq = np.empty((n_band, n_t, 4))
            tq = np.empty((n_band, n_t, 4))
            rq[..., 0] = grid.radii[:-1, None]
            rq[..., 1] = grid.radii[1:, None]
            rq[..., 2] = rq[..., 3] = r_mid[:, None]
            tq[..., 0] = tq[..., 1] = th_mid[None, :]
            tq[..., 2] = th[None, :]
            tq[..., 3] = th[jp][None, :]
            quad_pts = np.stack([rq * np.cos(tq), rq * np.sin(tq)], axis=-1)

        rows = [self.cell_nodes[..., :, None].repeat(4, axis=-1).ravel()]
        cols = [self.cell_nodes[..., None, :].repeat(4, axis=-2).ravel()]
        vals = [kc.ravel()]

        if potential is not None:
            vq = potential(quad_pts.reshape(-1, 2)).reshape(n_band, n_t, 4)
            mass = np.einsum("btq,qm,qn->btmn",
                             self.cell_volw * vq, _BASIS_ROWS, _BASIS_ROWS)
            vals[0] = (kc + mass).ravel()

        self.origin = n_r * n_t if grid.kind == "disk" else None
        if grid.kind == "disk":
            p = grid.ring_points(0)
            p_next = np.take(p, jp, axis=0)
            area = 0.5 * np.abs(p[:, 0] * p_next[:, 1]
                                - p[:, 1] * p_next[:, 0])
            # P1 gradients for vertices (origin, p, p_next)
            e0 = p_next - p
            e1 = -p_next
            e2 = p
            g_tri = np.stack([
                np.stack([-e0[:, 1], e0[:, 0]], axis=1),
                np.stack([-e1[:, 1], e1[:, 0]], axis=1),
                np.stack([-e2[:, 1], e2[:, 0]], axis=1),
            ], axis=1) / (2.0 * area)[:, None, None]
            mids = np.concatenate([0.5 * (p + p_next), 0.5 * p_next, 0.5 * p])
            a_mid = f.matrices(mids).reshape(3, n_t, 2, 2).mean(axis=0)
            _check_elliptic(a_mid, "inside the core disk")
            kt = area[:, None, None] * np.einsum(
                "tai,tij,tbj->tab", g_tri, a_mid, g_tri)
            self.tri_k = kt
            self.tri_nodes = np.stack(
                [np.full(n_t, self.origin), jj, jp], axis=1)
            self.tri_area = area
            self.tri_g = g_tri
            self.tri_a = a_mid
            if potential is not None:
                vt = potential(mids).reshape(3, n_t).T
                kt = kt + np.einsum("tq,qm,qn->tmn",
                                    (area / 3.0)[:, None] * vt,
                                    _TRI_BASIS, _TRI_BASIS)
            rows.append(self.tri_nodes[:, :, None].repeat(3, axis=2).ravel())
            cols.append(self.tri_nodes[:, None, :].repeat(3, axis=1).ravel())
            vals.append(kt.ravel())
        else:
            self.tri_k = None
            self.tri_nodes = None
            self.tri_area = None
            self.tri_g = None
            self.tri_a = None

        n_nodes = grid.node_count
        self.matrix = coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_nodes, n_nodes)).tocsr()

        outer = np.arange((n_r - 1) * n_t, n_r * n_t)
        if grid.kind == "annulus":
            inner = np.arange(n_t)
            self.boundary = np.concatenate([inner, outer])
        else:
            self.boundary = outer
        self.outer = outer
        mask = np.ones(n_nodes, dtype=bool)
        mask[self.boundary] = False
        self.interior = np.nonzero(mask)[0]
        self.k_ii = self.matrix[self.interior][:, self.interior].tocsc()
        self.k_ib = self.matrix[self.interior][:, self.boundary].tocsr()
        self._lu = None

    @property
    def lu(self):
        if self._lu is None:
            self._lu = splu(self.k_ii)
        return self._lu


_CACHE: dict[tuple, _Assembly] = {}
_CACHE_LIMIT = 8


def clear_operator_cache() -> None:
    _CACHE.clear()


def _field_fingerprint(f: CoefficientField) -> str:
    try:
        cfg = f.to_config()
    except FieldError:
        return f"custom-{id(f)}"
    return hashlib.sha1(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _get_assembly(grid: PolarGrid, f: CoefficientField,
                  potential=None) -> _Assembly:
    if os.environ.get("FREQLAB_CACHE", "1") == "0" or potential is not None:
        return _Assembly(grid, f, potential)
    key = (grid.key(), _field_fingerprint(f))
    asm = _CACHE.get(key)
    if asm is None:
        asm = _Assembly(grid, f, None)
        if len(_CACHE) >= _CACHE_LIMIT:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = asm
    return asm


# -- solutions -----------------------------------------------------------


@dataclass
class DiscreteSolution:
    """Nodal solution values plus the assembly that produced them."""

    grid: PolarGrid
    values: np.ndarray
    coefficient: CoefficientField
    boundary_data: np.ndarray
    residual_norm: float
    iterations: int
    meta: dict = field(default_factory=dict)
    _assembly: Any = None
    _cache: dict = field(default_factory=dict)

    def ring_values(self, i: int) -> np.ndarray:
        n_t = self.grid.n_theta
        return self.values[i * n_t:(i + 1) * n_t]

    def node_grid(self) -> np.ndarray:
        """Values reshaped to (n_r, n_theta); the origin node is dropped."""
        n_r, n_t = self.grid.n_r, self.grid.n_theta
        return self.values[:n_r * n_t].reshape(n_r, n_t)


def _boundary_values(g: Any, pts: np.ndarray, n_t: int) -> np.ndarray:
    if callable(g):
        vals = np.asarray(g(pts), dtype=float)
    else:
        vals = np.asarray(g, dtype=float)
    if vals.shape != (n_t,):
        raise SolverError(
            f"boundary data must give {n_t} ring values, got shape {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise SolverError("boundary data contains non-finite values")
    return vals


def solve_dirichlet(f: CoefficientField, r: float, g: Any, grid: PolarGrid,
                    *, g_inner: Any = None,
                    potential: Optional[Callable] = None,
                    rtol: float = 1e-10,
                    preconditioner: str = "lu") -> DiscreteSolution:
    """Solve -div(A grad u) = 0 (plus an optional reaction term
    potential * u) with Dirichlet data g on the circle of radius r.

    The linear system is symmetric positive definite and is solved by
    preconditioned conjugate gradients to relative residual ``rtol``
    with iteration cap 50 sqrt(unknowns).  ``preconditioner`` is "lu"
    (sparse factorization, the default) or "jacobi".
    """
    if f.n != 2:
        raise NotImplementedError("only the two-dimensional solver is implemented")
    if abs(r - grid.r_out) > 1e-12 * max(1.0, r):
        raise SolverError(
            f"grid outer radius {grid.r_out:.12g} does not match r={r:.12g}")
    if grid.kind == "annulus" and g_inner is None:
        raise SolverError("annulus grids need inner boundary data g_inner")
    if f.domain_radius < grid.r_out * (1 - 1e-12):
        raise SolverError(
            f"field domain radius {f.domain_radius:.6g} does not cover "
            f"the grid radius {grid.r_out:.6g}")

    asm = _get_assembly(grid, f, potential)
    n_t = grid.n_theta
    g_out = _boundary_values(g, grid.ring_points(grid.n_r - 1), n_t)
    if grid.kind == "annulus":
        g_in = _boundary_values(g_inner, grid.ring_points(0), n_t)
        g_all = np.concatenate([g_in, g_out])
    else:
        g_all = g_out

    rhs = -asm.k_ib @ g_all
    n_unknowns = asm.interior.size
    cap = int(50 * math.sqrt(n_unknowns)) + 10
    rhs_norm = float(np.linalg.norm(rhs))

    if rhs_norm == 0.0:
        x = np.zeros(n_unknowns)
        iterations = 0
    else:
        if preconditioner == "lu":
            m_op = LinearOperator((n_unknowns, n_unknowns), matvec=asm.lu.solve)
        elif preconditioner == "jacobi":
            inv_d = 1.0 / asm.k_ii.diagonal()
            m_op = LinearOperator((n_unknowns, n_unknowns),
                                  matvec=lambda v: inv_d * v)
        else:
            raise SolverError(f"unknown preconditioner {preconditioner!r}")
        count = [0]

        def _tick(_):
            count[0] += 1

        try:
            x, info = cg(asm.k_ii, rhs, rtol=rtol, maxiter=cap, M=m_op,
                         callback=_tick)
        except TypeError:  # older scipy spells the tolerance "tol"
            x, info = cg(asm.k_ii, rhs, tol=rtol, maxiter=cap, M=m_op,
                         callback=_tick)
        iterations = count[0]
        res = float(np.linalg.norm(asm.k_ii @ x - rhs)) / rhs_norm
        if info != 0 or res > rtol:
            raise SolverError(
                f"conjugate gradients stopped after {iterations} iterations "
                f"(cap {cap}) at relative residual {res:.3e}, requested {rtol:.1e}")

    residual = 0.0 if rhs_norm == 0.0 else float(
        np.linalg.norm(asm.k_ii @ x - rhs)) / rhs_norm
    values = np.empty(grid.node_count)
    values[asm.boundary] = g_all
    values[asm.interior] = x
    return DiscreteSolution(grid, values, f, g_out, residual, iterations,
                            meta={}, _assembly=asm)


# -- functionals ---------------------------------------------------------


def _cumulative_energy(u: DiscreteSolution, asm: _Assembly,
                       values: np.ndarray, tag: str) -> np.ndarray:
    """Energy inside each grid radius; index i matches radii[i].

    Evaluated in factored form (G u)^T B (G u) per quadrature point so
    that constant values give exactly zero."""
    cached = u._cache.get(tag)
    if cached is not None:
        return cached
    uc = values[asm.cell_nodes]
    band = np.zeros(u.grid.n_r - 1)
    for q in range(4):
        gv = np.einsum("im,btm->bti", asm.quad_g[q], uc)
        band += asm.quad_w * np.einsum("bti,btij,btj->b", gv,
                                       asm.quad_b[q], gv)
    core = 0.0
    if asm.tri_k is not None:
        ut = values[asm.tri_nodes]
        # gradient from differences against the origin node: exact for
        # constants since the basis gradients sum to zero
        dv = ut[:, 1:] - ut[:, :1]
        gv = np.einsum("tmi,tm->ti", asm.tri_g[:, 1:, :], dv)
        core = float(np.sum(asm.tri_area * np.einsum(
            "ti,tij,tj->t", gv, asm.tri_a, gv)))
    cum = np.empty(u.grid.n_r)
    cum[0] = core
    cum[1:] = core + np.cumsum(band)
    u._cache[tag] = cum
    return cum


def _ring_lookup(u: DiscreteSolution, r: float, what: str) -> tuple[int, bool]:
    grid = u.grid
    if not grid.radii[0] * (1 - 1e-9) <= r <= grid.radii[-1] * (1 + 1e-9):
        raise ValueError(
            f"radius {r:.6g} outside the grid range "
            f"[{grid.radii[0]:.6g}, {grid.radii[-1]:.6g}] for {what}")
    i = grid.on_ring(r)
    if i is not None:
        return i, False
    return grid.nearest_ring(r), True


def _log_interp(radii: np.ndarray, table: np.ndarray, r: float) -> float:
    s = np.log(radii)
    x = math.log(r)
    j = int(np.searchsorted(s, x)) - 1
    j = min(max(j, 0), s.size - 2)
    t = (x - s[j]) / (s[j + 1] - s[j])
    lo, hi = table[j], table[j + 1]
    if lo > 0 and hi > 0:
        return float(math.exp((1 - t) * math.log(lo) + t * math.log(hi)))
    return float((1 - t) * lo + t * hi)


def dirichlet_energy(u: DiscreteSolution, r: float) -> float:
    """D(r): energy <A grad u, grad u> inside radius r, from the cell
    quadratic forms.  Off-ring radii interpolate in log-log and are
    flagged in the solution metadata."""
    asm = u._assembly
    i, interp = _ring_lookup(u, r, "dirichlet_energy")
    cum = _cumulative_energy(u, asm, u.values, "cumE")
    if not interp:
        return float(cum[i])
    u.meta.setdefault("interpolated_radii", []).append(float(r))
    return _log_interp(u.grid.radii, cum, r)


def dirichlet_energy_flux(u: DiscreteSolution, r: float) -> float:
    """D(r) in boundary-flux form: sum over ring nodes of u times the
    discrete flux from the cells inside.  Identical to
    ``dirichlet_energy`` at grid radii by the divergence structure."""
    asm = u._assembly
    i, interp = _ring_lookup(u, r, "dirichlet_energy_flux")
    if interp:
        # off the rings the two forms share the interpolated table
        return dirichlet_energy(u, r)
    if i == 0:
        if asm.tri_k is None:
            return 0.0
        ut = u.values[asm.tri_nodes]
        forces = np.einsum("tmn,tn->tm", asm.tri_k, ut)
        return float(np.sum(forces[:, 1:] * ut[:, 1:]))
    band = i - 1
    uc = u.values[asm.cell_nodes[band]]
    forces = np.einsum("tmn,tn->tm", asm.cell_k[band], uc)
    # local nodes 1, 2 lie on ring i
    return float(np.sum(forces[:, 1:3] * uc[:, 1:3]))


def weighted_gradient_energy(grid: PolarGrid, values: np.ndarray,
                             f: CoefficientField, r: float,
                             scalar_weight: Optional[Callable] = None) -> float:
    """int_{B_r} <A grad z, grad z> (w) for arbitrary nodal values z,
    e.g. differences of two solutions on the same grid.  The optional
    ``scalar_weight`` multiplies the integrand pointwise."""
    asm = _get_assembly(grid, f)
    i = grid.on_ring(r)
    if i is None:
        raise ValueError(f"radius {r:.6g} is not a grid radius")
    if scalar_weight is None:
        cell_k = asm.cell_k[:i]
    else:
        cell_k = _reweighted_cells(grid, asm, scalar_weight)[:i]
    uc = values[asm.cell_nodes[:i]]
    total = float(np.einsum("btmn,btm,btn->", cell_k, uc, uc))
    if asm.tri_k is not None:
        ut = values[asm.tri_nodes]
        if scalar_weight is None:
            tri_k = asm.tri_k
        else:
            p = grid.ring_points(0)
            jp = (np.arange(grid.n_theta) + 1) % grid.n_theta
            p_next = np.take(p, jp, axis=0)
            mids = np.concatenate([0.5 * (p + p_next), 0.5 * p_next, 0.5 * p])
            wt = scalar_weight(mids).reshape(3, grid.n_theta).mean(axis=0)
            tri_k = asm.tri_k * wt[:, None, None]
        total += float(np.einsum("tmn,tm,tn->", tri_k, ut, ut))
    return total


def _reweighted_cells(grid: PolarGrid, asm: _Assembly,
                      scalar_weight: Callable) -> np.ndarray:
    # cheap approximation: one weight per cell at the cell center
    n_band, n_t = grid.n_r - 1, grid.n_theta
    r_mid = np.exp(np.log(grid.radii[:-1]) + 0.5 * grid.d_s)
    th_mid = grid.theta + 0.5 * grid.d_theta
    rr = np.repeat(r_mid, n_t)
    tt = np.tile(th_mid, n_band)
    pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=1)
    w = scalar_weight(pts).reshape(n_band, n_t)
    return asm.cell_k * w[:, :, None, None]


def volume_mean_square(u: DiscreteSolution, r: float,
                       values: Optional[np.ndarray] = None) -> float:
    """mean over B_r of u^2, in the assembly's own volume quadrature."""
    asm = u._assembly
    vals = u.values if values is None else values
    i, interp = _ring_lookup(u, r, "volume_mean_square")
    tag = "cumM" if values is None else None
    cached = u._cache.get(tag) if tag else None
    if cached is None:
        uc = vals[asm.cell_nodes]
        uq = np.einsum("qm,btm->btq", _BASIS_ROWS, uc)
        band = np.einsum("btq,btq->b", asm.cell_volw, uq ** 2)
        band_area = asm.cell_volw.sum(axis=(1, 2))
        core = core_area = 0.0
        if asm.tri_k is not None:
            ut = vals[asm.tri_nodes]
            um = np.einsum("qm,tm->tq", _TRI_BASIS, ut)
            core = float(np.sum(asm.tri_area / 3.0 * np.sum(um ** 2, axis=1)))
            core_area = float(asm.tri_area.sum())
        cum = np.empty(u.grid.n_r)
        cum[0] = core
        cum[1:] = core + np.cumsum(band)
        area = np.empty(u.grid.n_r)
        area[0] = core_area
        area[1:] = core_area + np.cumsum(band_area)
        cached = (cum, area)
        if tag:
            u._cache[tag] = cached
    cum, area = cached
    if not interp:
        return float(cum[i] / area[i])
    u.meta.setdefault("interpolated_radii", []).append(float(r))
    return _log_interp(u.grid.radii, cum / area, r)


def gradient_mean_square(u: DiscreteSolution, r: float,
                         weight: Optional[CoefficientField] = None,
                         values: Optional[np.ndarray] = None) -> float:
    """mean over B_r of <W grad u, grad u>; W defaults to the identity."""
    w_field = weight if weight is not None else CoefficientField.identity(2)
    vals = u.values if values is None else values
    i, interp = _ring_lookup(u, r, "gradient_mean_square")
    if interp:
        u.meta.setdefault("interpolated_radii", []).append(float(r))
    radius = float(u.grid.radii[i])
    total = weighted_gradient_energy(u.grid, vals, w_field, radius)
    asm = u._assembly
    area = float(asm.cell_volw[:i].sum()) if i > 0 else 0.0
    if asm.tri_area is not None:
        area += float(asm.tri_area.sum())
    return total / area


def _ring_integral(u: DiscreteSolution, i: int,
                   weight_at: Callable[[np.ndarray], np.ndarray]) -> float:
    """int over the ring of (trace of u)^2 * weight, Simpson in angle.

    The bilinear trace is piecewise linear in theta, so the midpoint
    value is the mean of the endpoints and Simpson integrates the
    square exactly against a smooth weight's samples."""
    grid = u.grid
    n_t = grid.n_theta
    rho = grid.radii[i]
    uv = u.ring_values(i)
    u_next = np.roll(uv, -1)
    u_mid = 0.5 * (uv + u_next)
    th = grid.theta
    pts_node = rho * np.stack([np.cos(th), np.sin(th)], axis=1)
    th_mid = th + 0.5 * grid.d_theta
    pts_mid = rho * np.stack([np.cos(th_mid), np.sin(th_mid)], axis=1)
    w_node = weight_at(pts_node)
    w_mid = weight_at(pts_mid)
    w_next = np.roll(w_node, -1)
    seg = (grid.d_theta / 6.0) * (uv ** 2 * w_node + 4.0 * u_mid ** 2 * w_mid
                                  + u_next ** 2 * w_next)
    return float(seg.sum())


def boundary_mass(u: DiscreteSolution, f: CoefficientField, r: float) -> float:
    """H(r): int over the circle of u^2 mu dsigma with
    mu = <A x/|x|, x/|x|>.  Off-ring radii interpolate between the two
    neighboring rings in log-log, flagged in metadata."""
    i, interp = _ring_lookup(u, r, "boundary_mass")
    if not interp:
        rho = u.grid.radii[i]
        return rho * _ring_integral(u, i, lambda p: np.atleast_1d(mu_factor(f, p)))
    u.meta.setdefault("interpolated_radii", []).append(float(r))
    lo = max(i - 1, 0)
    hi = min(lo + 1, u.grid.n_r - 1)
    vals = np.array([boundary_mass(u, f, u.grid.radii[lo]),
                     boundary_mass(u, f, u.grid.radii[hi])])
    return _log_interp(u.grid.radii[[lo, hi]], vals, r)


def boundary_mass_scalar(u: DiscreteSolution, abar: CoefficientField,
                         r: float) -> float:
    """h(r) = r^(1-n) int over the circle of abar u^2 dsigma; in two
    dimensions the normalization cancels the circumference growth."""
    i, interp = _ring_lookup(u, r, "boundary_mass_scalar")
    if abar.arity is not Arity.ISOTROPIC:
        raise FieldError("scalar boundary mass needs a scalar weight field")
    if not interp:
        return _ring_integral(u, i, abar.evaluate)
    u.meta.setdefault("interpolated_radii", []).append(float(r))
    lo = max(i - 1, 0)
    hi = min(lo + 1, u.grid.n_r - 1)
    vals = np.array([boundary_mass_scalar(u, abar, u.grid.radii[lo]),
                     boundary_mass_scalar(u, abar, u.grid.radii[hi])])
    return _log_interp(u.grid.radii[[lo, hi]], vals, r)


def ring_trace(u: DiscreteSolution, r: float) -> np.ndarray:
    """Solution values on the grid ring nearest to r (exact match
    required), e.g. to reuse as boundary data for a comparison solve."""
    i = u.grid.on_ring(r)
    if i is None:
        raise ValueError(f"radius {r:.6g} is not a grid radius")
    return u.ring_values(i).copy()


def ring_summary(u: DiscreteSolution,
                 f: Optional[CoefficientField] = None) -> dict[str, np.ndarray]:
    """Per-ring table (r, mean u, mean u^2, D, H) for CSV export."""
    f = f if f is not None else u.coefficient
    grid = u.grid
    radii = grid.radii
    mean_u = np.array([u.ring_values(i).mean() for i in range(grid.n_r)])
    mean_u2 = np.array([(u.ring_values(i) ** 2).mean() for i in range(grid.n_r)])
    d_vals = np.array([dirichlet_energy(u, rr) for rr in radii])
    h_vals = np.array([boundary_mass(u, f, rr) for rr in radii])
    return {"r": radii.copy(), "mean_u": mean_u, "mean_u2": mean_u2,
            "D": d_vals, "H": h_vals}
