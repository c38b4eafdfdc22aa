"""Matrix fields built from a potential and a diagonal change of variables.

The central object is the curvature matrix

    C(x) = Hess V(x) - (L A^{-1}) A = -J_{LH}^T (J_H^T)^{-1},

whose smallest eigenvalue, minimized over space, bounds the spectral gap
from below.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from . import numdiff
from .errors import AsymmetricResult, SingularWeight, UnsupportedWeight, WeightVanished
from .model import DiagonalWeight, Potential, identity_weight

SYMMETRY_TOL = 1e-9
# boundary undercut below this (relative) is saturation, not an escaping infimum
ESCAPE_TOL = 1e-6


@dataclass(frozen=True)
class ScalarField:
    """A test function f with optional analytic gradient and Hessian."""

    value: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None

    def grad(self, x):
        if self.gradient is not None:
            return self.gradient(x)
        return numdiff.gradient(self.value, x)

    def hess(self, x):
        if self.hessian is not None:
            return self.hessian(x)
        return numdiff.hessian(self.value, x)


def _field(f) -> ScalarField:
    return f if isinstance(f, ScalarField) else ScalarField(f)


def apply_generator(V: Potential, f, x):
    """Lf(x) = Laplacian f(x) - grad V(x) . grad f(x)."""
    f = _field(f)
    x = np.asarray(x, dtype=float)
    lap = np.trace(f.hess(x), axis1=-2, axis2=-1)
    return lap - np.sum(V.gradient(x) * f.grad(x), axis=-1)


def carre_du_champ(f, g, x):
    """Gamma(f, g)(x) = grad f(x) . grad g(x)."""
    x = np.asarray(x, dtype=float)
    return np.sum(_field(f).grad(x) * _field(g).grad(x), axis=-1)


def _require_diagonal(W):
    if not isinstance(W, DiagonalWeight):
        raise UnsupportedWeight("bound computations accept diagonal weights only")


def curvature_matrix(V: Potential, W: Optional[DiagonalWeight], x):
    """-J_{LH}^T (J_H^T)^{-1} for H_i(x) = h_i(x_i).

    Off-diagonal entries are d_ij V. Diagonal entry i is
    -d_i(L h_i)(x) / h_i'(x_i) with L h_i = h_i'' - d_i V h_i', i.e.
    d_ii V + d_i V h_i''/h_i' - h_i'''/h_i'.
    """
    if W is None:
        W = identity_weight(V.dim)
    _require_diagonal(W)
    x = np.asarray(x, dtype=float)
    H = V.hessian(x)
    if W.family == "identity":
        return H
    g = W.g(x)
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise WeightVanished("weight h_i' is non-positive or non-finite at an evaluation point")
    dg = W.dg(x)
    d2g = W.d2g(x)
    grad = V.gradient(x)
    C = np.array(H, copy=True)
    idx = np.arange(V.dim)
    C[..., idx, idx] = H[..., idx, idx] + grad * dg / g - d2g / g
    asym = np.abs(C - np.swapaxes(C, -1, -2)).max(initial=0.0)
    if asym > SYMMETRY_TOL * max(np.abs(C).max(initial=0.0), 1.0):
        raise AsymmetricResult(f"curvature matrix asymmetric by {asym:g}")
    return C


def smallest_eigenvalue(M):
    M = np.asarray(M)
    if M.shape[-1] == 1:
        return M[..., 0, 0]
    return np.linalg.eigvalsh(M)[..., 0]


# ---------------------------------------------------------------------------
# symmetry of the four equivalent matrix assertions


@dataclass(frozen=True)
class MatrixField:
    dim: int
    evaluator: Callable
    tol: float = SYMMETRY_TOL

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    def asymmetry(self, x) -> float:
        M = self(x)
        return _rel_asym(M)

    def is_symmetric(self, x) -> bool:
        return self.asymmetry(x) <= self.tol


def diagonal_matrix_field(W: DiagonalWeight) -> MatrixField:
    """The field A = diag(1/h_i') of a diagonal weight."""
    return MatrixField(W.dim, W.A)


def _rel_asym(M):
    num = np.abs(M - np.swapaxes(M, -1, -2)).max(initial=0.0)
    den = max(np.abs(M).max(initial=0.0), 1.0)
    return float(num / den)


ASSERTIONS = ("Ainv_T_grad_Ainv", "Ainv_T_L_Ainv", "S_M_A", "Ainv_M_A_A")


@dataclass
class SymmetryReport:
    symmetric: dict
    worst: dict
    violations: dict = field(default_factory=dict)

    @property
    def all_symmetric(self) -> bool:
        return all(self.symmetric.values())


def symmetry_report(V: Potential, A: MatrixField, box: float, n_samples: int = 50,
                    seed: int = 0, tol: float = 1e-6, step: float = 1e-4) -> SymmetryReport:
    """Check the four equivalent symmetry assertions at random points of [-box, box]^d.

    Derivatives of A^{-1} are taken by central differences, so ``tol`` is a
    relative tolerance well above the truncation error of ``step``.
    """
    d = V.dim
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(n_samples, d))

    def Binv(y):
        M = A(y)
        if not np.all(np.isfinite(M)) or abs(np.linalg.det(M)) < 1e-14:
            raise SingularWeight(f"weight matrix not invertible at {np.asarray(y).tolist()}")
        return np.linalg.inv(M)

    worst = {k: 0.0 for k in ASSERTIONS}
    bad = {k: [] for k in ASSERTIONS}
    eye = np.eye(d)
    for x in pts:
        Am = A(x)
        B = Binv(x)
        dB = [(Binv(x + step * eye[k]) - Binv(x - step * eye[k])) / (2 * step) for k in range(d)]
        d2B = [(Binv(x + step * eye[k]) - 2 * B + Binv(x - step * eye[k])) / step**2 for k in range(d)]
        gV = V.gradient(x)
        LB = sum(d2B) - sum(gV[k] * dB[k] for k in range(d))
        M_A = Am @ V.hessian(x) @ B - Am @ LB
        S = np.linalg.inv(Am @ Am.T)
        vals = {
            "Ainv_T_grad_Ainv": max(_rel_asym(B.T @ dB[k]) for k in range(d)),
            "Ainv_T_L_Ainv": _rel_asym(B.T @ LB),
            "S_M_A": _rel_asym(S @ M_A),
            "Ainv_M_A_A": _rel_asym(B @ M_A @ Am),
        }
        for k, v in vals.items():
            worst[k] = max(worst[k], v)
            if v > tol:
                bad[k].append(x.tolist())
    return SymmetryReport(
        symmetric={k: worst[k] <= tol for k in ASSERTIONS},
        worst=worst,
        violations={k: v for k, v in bad.items() if v},
    )


# ---------------------------------------------------------------------------
# infimum of the smallest eigenvalue over a box


@dataclass(frozen=True)
class InfRhoResult:
    value: float
    argmin: tuple
    radius: float
    grid_n: int
    status: str
    grid_value: float
    interior_min: float
    boundary_min: float

    @property
    def bounded_below(self) -> bool:
        return self.value > 0

    @property
    def attained_inside(self) -> bool:
        """False when the box boundary undercuts the interior, so the true infimum may lie outside."""
        scale = max(abs(self.interior_min), 1.0)
        return not (self.boundary_min < self.interior_min - ESCAPE_TOL * scale)

    def as_dict(self) -> dict:
        return {
            "value": self.value, "argmin": list(self.argmin), "radius": self.radius,
            "grid_n": self.grid_n, "status": self.status, "grid_value": self.grid_value,
            "interior_min": self.interior_min, "boundary_min": self.boundary_min,
            "attained_inside": self.attained_inside,
        }


def box_grid(d: int, radius: float, n: int):
    axis = np.linspace(-radius, radius, n)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1), axis


def grid_infimum(fun, d: int, radius: float, grid_n: int, exclude=None,
                 refine: bool = True, xtol: float = 1e-8, max_sweeps: int = 100) -> InfRhoResult:
    """Minimize a vectorized scalar field over [-radius, radius]^d.

    A full grid scan is followed by coordinate descent around the grid
    argmin. Ties in the scan go to the lexicographically smallest point.
    ``exclude`` maps points to a boolean mask of points to skip.
    """
    if grid_n < 8:
        raise ValueError("grid_n must be at least 8")
    pts, axis = box_grid(d, radius, grid_n)
    vals = np.asarray(fun(pts), dtype=float)
    if exclude is not None:
        vals = np.where(exclude(pts), np.inf, vals)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    k = int(np.argmin(vals))
    grid_val = float(vals[k])
    on_edge = np.any(np.abs(np.abs(pts) - radius) < 1e-12, axis=-1)
    interior = vals[~on_edge]
    boundary = vals[on_edge]
    interior_min = float(interior.min()) if interior.size else np.inf
    boundary_min = float(boundary.min()) if boundary.size else np.inf

    best = pts[k].copy()
    best_val = grid_val
    status = "grid-only"
    if refine and np.isfinite(grid_val):
        h = axis[1] - axis[0]

        def scalar(z):
            z = np.atleast_2d(z)
            if exclude is not None and exclude(z)[0]:
                return np.inf
            return float(np.asarray(fun(z))[0])

        x = best.copy()
        for _ in range(max_sweeps):
            moved = 0.0
            for i in range(d):
                lo, hi = max(-radius, x[i] - h), min(radius, x[i] + h)

                def line(t, i=i):
                    y = x.copy()
                    y[i] = t
                    return scalar(y)

                res = optimize.minimize_scalar(line, bounds=(lo, hi), method="bounded",
                                               options={"xatol": xtol * 1e-2})
                if res.fun < scalar(x):
                    moved = max(moved, abs(res.x - x[i]))
                    x[i] = res.x
            if moved < xtol:
                break
        val = scalar(x)
        status = "locally-refined"
        if val < best_val:
            best, best_val = x, val
    return InfRhoResult(
        value=float(best_val), argmin=tuple(float(t) for t in best), radius=float(radius),
        grid_n=int(grid_n), status=status, grid_value=grid_val,
        interior_min=interior_min, boundary_min=boundary_min,
    )


def default_inf_grid(d: int) -> int:
    return {1: 4001, 2: 201, 3: 41}.get(d, 15)


def inf_rho(V: Potential, W: Optional[DiagonalWeight] = None, box: float = 8.0,
            grid_n: Optional[int] = None) -> InfRhoResult:
    """Numerical infimum over [-box, box]^d of the smallest eigenvalue of the curvature matrix."""
    if W is None:
        W = identity_weight(V.dim)
    _require_diagonal(W)
    if grid_n is None:
        grid_n = default_inf_grid(V.dim)
    return grid_infimum(lambda p: smallest_eigenvalue(curvature_matrix(V, W, p)),
                        V.dim, box, grid_n, exclude=V.singular_mask)


# ---------------------------------------------------------------------------
# intertwining identity  A grad(L f) = (L_A - M_A)(A grad f)


def _d1(fun, x, e, h):
    return (fun(x + e) - fun(x - e)) / (2 * h)


def _fd_grad(fun, x, h):
    e = np.eye(x.shape[-1]) * h
    return np.array([_d1(fun, x, e[k], h) for k in range(x.shape[-1])])


def _fd_lap(fun, x, h):
    e = np.eye(x.shape[-1]) * h
    f0 = fun(x)
    return sum((fun(x + e[k]) - 2 * f0 + fun(x - e[k])) / h**2 for k in range(x.shape[-1]))


def check_intertwining(V: Potential, W: DiagonalWeight, f, x, step: float = 1e-3):
    """Residual A grad(Lf)(x) - [L_A(A grad f) - M_A A grad f](x).

    Both sides are assembled from nested central differences of ``f`` with
    the same ``step``, so the residual is a pure truncation/rounding error of
    order step^2. Here
    (L_A F)_i = L F_i + 2 (h_i''/h_i') d_i F_i and M_A = A C A^{-1} with C
    the curvature matrix.
    """
    _require_diagonal(W)
    f = f.value if isinstance(f, ScalarField) else f
    x = np.asarray(x, dtype=float)
    d = V.dim
    h = step
    e = np.eye(d) * h

    def a(y):
        return 1.0 / W.g(y)

    def Lf(y):
        return _fd_lap(f, y, h) - V.gradient(y) @ _fd_grad(f, y, h)

    lhs = a(x) * np.array([_d1(Lf, x, e[i], h) for i in range(d)])

    def F(i):
        return lambda y: a(y)[i] * _d1(f, y, e[i], h)

    Fx = np.array([F(i)(x) for i in range(d)])
    ratio = W.dg(x) / W.g(x)
    gV = V.gradient(x)
    LAF = np.empty(d)
    for i in range(d):
        Fi = F(i)
        grad_Fi = _fd_grad(Fi, x, h)
        LAF[i] = _fd_lap(Fi, x, h) - gV @ grad_Fi + 2 * ratio[i] * grad_Fi[i]
    ax = a(x)
    C = curvature_matrix(V, W, x)
    M_A = ax[:, None] * C / ax[None, :]
    return lhs - (LAF - M_A @ Fx)


def intertwining_decay(V, W, f, x, steps):
    """Residual norms over a sequence of steps and the fitted log-log slope."""
    norms = np.array([np.linalg.norm(check_intertwining(V, W, f, x, s)) for s in steps])
    steps = np.asarray(steps, dtype=float)
    positive = norms > 0
    if positive.sum() < 2:
        return norms, np.inf
    slope = np.polyfit(np.log(steps[positive]), np.log(norms[positive]), 1)[0]
    return norms, float(slope)
