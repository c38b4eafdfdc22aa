"""Finite-volume discretization of -L on a truncated grid and its low spectrum.

The Dirichlet form  E(f, f) = int |grad f|^2 dmu  is discretized with
conductances exp(-V(midpoint)) on grid edges and node masses exp(-V(node))
(trapezoid weights at the box faces), normalized so the masses sum to one.
No flux crosses the box boundary, so constants stay in the kernel.

Eigenproblems K u = lam M u are solved in the reduced symmetric form
M^{-1/2} K M^{-1/2}; its entries are assembled in log space so that masses
far below double precision never have to be formed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import GridTooLarge, NoConvergence, OverflowGuard
from ..model import Potential

log = logging.getLogger(__name__)

NODE_CAP = 4_000_000
# nodes whose unnormalized weight is below exp(-VCUT) relative to the peak are dropped
VCUT = 700.0
DENSE_MAX = 3000
SHIFT = -1e-2

DEFAULT_GRIDS = {1: (4001, 8.0), 2: (161, 7.0), 3: (41, 5.0)}


@dataclass(frozen=True)
class Grid:
    dim: int
    radius: float
    n: int
    cap: int = NODE_CAP

    def __post_init__(self):
        if self.n < 16:
            raise ValueError(f"need at least 16 points per axis, got {self.n}")
        if self.n**self.dim > self.cap:
            raise GridTooLarge(f"{self.n}^{self.dim} nodes exceeds the cap of {self.cap}")

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.n - 1)

    @property
    def axis(self):
        return np.linspace(-self.radius, self.radius, self.n)

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def nodes(self):
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def coarsened(self) -> "Grid":
        return Grid(self.dim, self.radius, (self.n - 1) // 2 + 1, self.cap)

    def as_dict(self) -> dict:
        return {"dim": self.dim, "radius": self.radius, "n": self.n, "h": self.h}


def default_grid(d: int) -> Grid:
    if d not in DEFAULT_GRIDS:
        raise GridTooLarge(f"no oracle grid for dimension {d} (supported: 1-3)")
    n, R = DEFAULT_GRIDS[d]
    return Grid(d, R, n)


@dataclass(frozen=True)
class DiscreteOperator:
    """Stiffness K and mass m on the active nodes of a grid.

    Node vectors passed to the oracle functions live on ``nodes`` (the active
    nodes, in C order of the full grid).
    """

    grid: Grid
    K: sp.csr_matrix = field(repr=False)
    m: np.ndarray = field(repr=False)
    reduced: sp.csr_matrix = field(repr=False)
    active: np.ndarray = field(repr=False)
    log_sqrt_m: np.ndarray = field(repr=False)
    boundary: str = "neumann"

    @property
    def size(self) -> int:
        return int(self.m.size)

    @property
    def nodes(self):
        return self.grid.nodes[self.active]

    @property
    def sqrt_m(self):
        return np.exp(self.log_sqrt_m)

    def to_full(self, f, fill=0.0):
        out = np.full(self.grid.n**self.grid.dim, fill, dtype=float)
        out[self.active] = f
        return out.reshape(self.grid.shape)


def discretize(V: Potential, grid: Grid) -> DiscreteOperator:
    d, n, h = grid.dim, grid.n, grid.h
    if V.dim != d:
        raise ValueError("potential and grid dimensions differ")
    nodes = grid.nodes
    v = np.asarray(V.value(nodes), dtype=float)
    if not np.all(np.isfinite(v)):
        raise OverflowGuard("potential is not finite at every grid node")
    vmin = float(v.min())
    active = (v - vmin) <= VCUT
    N = int(active.sum())
    index = np.full(v.size, -1, dtype=np.int64)
    index[active] = np.arange(N)

    trap = np.ones(n)
    trap[0] = trap[-1] = 0.5
    multi = np.unravel_index(np.arange(v.size), grid.shape)
    T = np.ones(v.size)
    for k in range(d):
        T = T * trap[multi[k]]

    # log of the unnormalized mass and its normalization
    logw = -(v - vmin) + np.log(T) + d * np.log(h)
    logZ = float(np.log(np.exp(logw[active] - logw[active].max()).sum()) + logw[active].max())
    log_m = logw - logZ

    rows, cols, red, kval = [], [], [], []
    diag_red = np.zeros(v.size)
    diag_k = np.zeros(v.size)
    strides = np.array([n ** (d - 1 - k) for k in range(d)])
    for k in range(d):
        p = np.nonzero(multi[k] < n - 1)[0]
        q = p + strides[k]
        keep = active[p] & active[q]
        p, q = p[keep], q[keep]
        mid = nodes[p].copy()
        mid[:, k] += 0.5 * h
        vm = np.asarray(V.value(mid), dtype=float)
        if not np.all(np.isfinite(vm)):
            raise OverflowGuard("potential is not finite at an edge midpoint")
        tk_p, tk_q = trap[multi[k][p]], trap[multi[k][q]]
        off = -np.exp(0.5 * (v[p] + v[q]) - vm) / (h * h * np.sqrt(tk_p * tk_q))
        diag_red += np.bincount(p, np.exp(v[p] - vm) / (h * h * tk_p), minlength=v.size)
        diag_red += np.bincount(q, np.exp(v[q] - vm) / (h * h * tk_q), minlength=v.size)
        # conductance exp(-V(mid)) h^{d-2} times the transverse trapezoid weights
        logc = -(vm - vmin) + np.log(T[p] / tk_p) + (d - 2) * np.log(h) - logZ
        c = np.exp(logc)
        diag_k += np.bincount(p, c, minlength=v.size) + np.bincount(q, c, minlength=v.size)
        rows += [index[p], index[q]]
        cols += [index[q], index[p]]
        red += [off, off]
        kval += [-c, -c]

    ai = np.arange(N)
    rows = np.concatenate(rows + [ai]) if rows else ai
    cols = np.concatenate(cols + [ai]) if cols else ai
    reduced = sp.csr_matrix((np.concatenate(red + [diag_red[active]]), (rows, cols)), shape=(N, N))
    K = sp.csr_matrix((np.concatenate(kval + [diag_k[active]]), (rows, cols)), shape=(N, N))
    return DiscreteOperator(grid, K, np.exp(log_m[active]), reduced, active, 0.5 * log_m[active])


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    grid: Grid
    method: str
    vectors: Optional[np.ndarray] = field(default=None, repr=False)
    extrapolated: Optional[np.ndarray] = None

    def gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    def eigenfunctions(self, op: DiscreteOperator):
        """Eigenvectors as node functions normalized in L^2(mu)."""
        return self.vectors / op.sqrt_m[:, None]

    def as_dict(self) -> dict:
        out = {
            "eigenvalues": self.eigenvalues.tolist(),
            "residuals": self.residuals.tolist(),
            "grid": self.grid.as_dict(),
            "method": self.method,
        }
        if self.extrapolated is not None:
            out["extrapolated"] = self.extrapolated.tolist()
        return out


def _solve_reduced(A, k, tol, seed, maxiter, dense_max):
    N = A.shape[0]
    if N <= dense_max:
        vals, vecs = scipy.linalg.eigh(A.toarray(), subset_by_index=[0, k - 1])
        return vals, vecs, "dense"
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(N)
    try:
        vals, vecs = spla.eigsh(A.tocsc(), k=k, sigma=SHIFT, which="LM", v0=v0,
                                tol=tol, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence("shift-invert Lanczos did not converge",
                            partial=np.sort(exc.eigenvalues)) from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order], "shift-invert-lanczos"


def lowest_eigs(op: DiscreteOperator, k: int = 4, tol: float = 1e-12, seed: int = 0,
                maxiter: Optional[int] = None, dense_max: int = DENSE_MAX) -> SpectrumResult:
    """The k smallest eigenvalues of K u = lam M u (the first is the constant ground state)."""
    if not 1 <= k <= 20:
        raise ValueError("k must lie in 1..20")
    k = min(k, op.size)
    vals, vecs, method = _solve_reduced(op.reduced, k, tol, seed, maxiter, dense_max)
    res = np.linalg.norm(op.reduced @ vecs - vecs * vals, axis=0)
    log.debug("eigs on %s: %s (%s)", op.grid, vals, method)
    return SpectrumResult(vals, res, op.grid, method, vecs)


def spectrum(V: Potential, grid: Optional[Grid] = None, k: int = 4, seed: int = 0,
             extrapolate: bool = False) -> SpectrumResult:
    """Discretize and solve; optionally Richardson-extrapolate from a grid with spacing 2h."""
    grid = grid or default_grid(V.dim)
    res = lowest_eigs(discretize(V, grid), k, seed=seed)
    if extrapolate:
        coarse = lowest_eigs(discretize(V, grid.coarsened()), k, seed=seed)
        res.extrapolated = richardson(coarse.eigenvalues, res.eigenvalues)
    return res


def richardson(coarse, fine, ratio: float = 2.0, order: float = 2.0):
    """Eliminate the leading h^order error term from two grids with spacing ratio ``ratio``."""
    coarse, fine = np.asarray(coarse), np.asarray(fine)
    return fine + (fine - coarse) / (ratio**order - 1.0)


def schrodinger_operator(op: DiscreteOperator, V: Potential) -> DiscreteOperator:
    """-L + V'' acting on scalar functions in L^2(mu) (one-dimensional use)."""
    pot = np.asarray(V.hessian(op.nodes))[:, 0, 0]
    reduced = (op.reduced + sp.diags(pot)).tocsr()
    K = (op.K + sp.diags(op.m * pot)).tocsr()
    return replace(op, reduced=reduced, K=K)


def spectral_gap(V: Potential, grid: Optional[Grid] = None, seed: int = 0) -> float:
    """lam_1 of the discretized -L."""
    return lowest_eigs(discretize(V, grid or default_grid(V.dim)), 2, seed=seed).gap()
