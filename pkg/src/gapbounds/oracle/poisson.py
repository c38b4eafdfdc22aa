"""Centered solutions of the discrete Poisson equation L g = f."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoConvergence
from .operator import DiscreteOperator


@dataclass
class PoissonSolution:
    g: np.ndarray
    iterations: int
    relative_residual: float
    centering_shift: float


def projected_cg(A, b, null, tol=1e-10, maxiter=None, precondition=True):
    """Conjugate gradients for a singular consistent SPD system.

    ``null`` spans the kernel of ``A`` (unit norm). The right-hand side, the
    residual and the preconditioned residual are projected onto its
    orthogonal complement at every step, which keeps the iterates in the
    range of ``A``.
    """
    n = b.size
    maxiter = maxiter or 20 * n

    def proj(v):
        return v - null * (null @ v)

    b = proj(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), 0, 0.0
    pinv = 1.0 / A.diagonal() if precondition else np.ones(n)
    x = np.zeros(n)
    r = b.copy()
    z = proj(pinv * r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        r = proj(r)
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            break
        z = proj(pinv * r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        raise NoConvergence(f"CG stopped at relative residual {rel:.3g} after {maxiter} iterations",
                            partial=proj(x))
    x = proj(x)
    # true residual, not the recursively updated one
    rel = float(np.linalg.norm(b - A @ x) / bnorm)
    return x, it, rel


def solve_poisson(op: DiscreteOperator, f, tol: float = 1e-10, maxiter=None) -> PoissonSolution:
    """Solve L g = f (i.e. K g = -M f) with g centered under the node masses.

    ``f`` is first centered by subtracting its mean; the size of that shift
    is recorded on the result.
    """
    f = np.asarray(f, dtype=float)
    shift = float(op.m @ f)
    fc = f - shift
    D = op.sqrt_m
    y, it, rel = projected_cg(op.reduced, -D * fc, D / np.linalg.norm(D), tol=tol, maxiter=maxiter)
    if rel > max(tol, 1e-8):
        raise NoConvergence(f"Poisson residual {rel:.3g} above tolerance")
    return PoissonSolution(y / D, it, rel, shift)
