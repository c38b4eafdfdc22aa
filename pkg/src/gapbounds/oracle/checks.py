"""Brascamp-Lieb type inequalities and spectral identities checked on a grid.

Every integral is a node-mass sum over the same discrete measure that
defines the eigenproblem, so each check runs in one discrete geometry.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..intertwine import ScalarField, curvature_matrix, smallest_eigenvalue
from ..model import DiagonalWeight, Potential, identity_weight, reweighted_potential
from .operator import DiscreteOperator, Grid, discretize, lowest_eigs, schrodinger_operator
from .poisson import solve_poisson
from .quadrature import grid_derivative_1d, grid_gradient, integrate, variance


@dataclass
class InequalityCheck:
    lhs: float
    rhs: float
    slack: float
    excluded: int = 0
    extra: dict = field(default_factory=dict)

    def holds(self, tol: float) -> bool:
        return self.slack >= -tol

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "excluded_nodes": self.excluded, **self.extra}


def _values_and_gradient(op: DiscreteOperator, f):
    """Node values and gradient of f; analytic gradients are used when supplied."""
    if isinstance(f, ScalarField):
        x = op.nodes
        return np.asarray(f.value(x), dtype=float), np.asarray(f.grad(x), dtype=float)
    if callable(f):
        vals = np.asarray(f(op.nodes), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    return vals, grid_gradient(op, vals)


def _quadratic_form(op, M, grad, V, exclude_singular=True):
    """sum_i m_i grad_i^T M_i^{-1} grad_i, skipping nodes where M is singular."""
    rho = smallest_eigenvalue(M)
    bad = ~np.isfinite(rho) | (rho <= 0)
    if exclude_singular:
        bad |= V.singular_mask(op.nodes)
    keep = ~bad
    sol = np.linalg.solve(M[keep], grad[keep][..., None])[..., 0]
    return float(op.m[keep] @ np.sum(grad[keep] * sol, axis=-1)), int(bad.sum())


def verify_bl(op: DiscreteOperator, V: Potential, W: Optional[DiagonalWeight], f) -> InequalityCheck:
    """Var(f) <= int grad f^T C^{-1} grad f dmu, with C = Hess V (W None/identity) or the curvature matrix.

    Nodes where C is not positive-definite, and the puncture around the
    singular point of power components, are excluded and counted.
    """
    vals, grad = _values_and_gradient(op, f)
    W = W or identity_weight(V.dim)
    M = curvature_matrix(V, W, op.nodes)
    rhs, excluded = _quadratic_form(op, M, grad, V)
    lhs = variance(op, vals)
    return InequalityCheck(lhs, rhs, rhs - lhs, excluded, {"weight": W.family})


def verify_cordero(op: DiscreteOperator, V: Potential, f, lambda_1: float) -> InequalityCheck:
    """Var(f) <= int grad f^T (Hess V + lambda_1 I)^{-1} grad f dmu after projecting f off {1, x_1..x_d}."""
    vals, grad = _values_and_gradient(op, f)
    x = op.nodes
    basis = np.column_stack([np.ones(len(x)), x])
    w = op.m
    G = basis.T @ (w[:, None] * basis)
    coef = np.linalg.solve(G, basis.T @ (w * vals))
    proj = vals - basis @ coef
    grad = grad - coef[1:]
    d = V.dim
    M = np.asarray(V.hessian(x)) + lambda_1 * np.eye(d)
    rhs, excluded = _quadratic_form(op, M, grad, V)
    lhs = variance(op, proj)
    centering = [float(w @ (proj * x[:, j])) for j in range(d)]
    return InequalityCheck(lhs, rhs, rhs - lhs, excluded,
                           {"lambda_1": lambda_1, "mean_residual": integrate(op, proj),
                            "covariance_residuals": centering})


def _one_dim_setup(V, W, f, grid):
    if V.dim != 1:
        raise ValueError("one-dimensional check called with a multi-dimensional potential")
    grid = grid or Grid(1, 8.0, 4001)
    op = discretize(V, grid)
    W = W or identity_weight(1)
    vals, grad = _values_and_gradient(op, f)
    return op, W, vals, grad[:, 0]


def verify_variance_identity_1d(V: Potential, W: Optional[DiagonalWeight], f,
                                grid: Optional[Grid] = None) -> InequalityCheck:
    """Var(f) = -2 int (a f')S(a g') dmu + int (a g') S [(L_A - M_A)(a g')] dmu with L g = f - mu(f).

    Scalars: a = 1/h', S = h'^2, L_A u = L u + 2 (h''/h') u', M_A the
    curvature entry. Derivatives are grid central differences. The returned
    ``slack`` is rhs - lhs and ``extra['mismatch']`` the relative gap.
    """
    op, W, vals, df = _one_dim_setup(V, W, f, grid)
    x = op.nodes
    sol = solve_poisson(op, vals)
    dg = grid_derivative_1d(op, sol.g)
    hp = W.g(x)[:, 0]
    hpp = W.dg(x)[:, 0]
    kappa = curvature_matrix(V, W, x)[:, 0, 0]
    Vp = np.asarray(V.gradient(x))[:, 0]
    F = dg / hp
    dF = grid_derivative_1d(op, F)
    d2F = grid_derivative_1d(op, dF)
    LAF = d2F - Vp * dF + 2.0 * (hpp / hp) * dF
    rhs = -2.0 * float(op.m @ (df * dg)) + float(op.m @ (F * hp**2 * (LAF - kappa * F)))
    lhs = variance(op, vals)
    mismatch = abs(lhs - rhs) / max(abs(lhs), 1e-300) if lhs != 0 or rhs != 0 else 0.0
    return InequalityCheck(lhs, rhs, rhs - lhs, 0,
                           {"mismatch": mismatch, "poisson_iterations": sol.iterations,
                            "poisson_residual": sol.relative_residual})


def weighted_gap_on_grid(V: Potential, W: DiagonalWeight, i: int, grid: Grid, seed: int = 0) -> float:
    """Spectral gap of the discretized generator of S_ii dmu."""
    op = discretize(reweighted_potential(V, W, i), grid)
    return lowest_eigs(op, 2, seed=seed).gap()


def verify_second_order_1d(V: Potential, W: Optional[DiagonalWeight], f, grid: Optional[Grid] = None,
                           lambda_1_A: Optional[float] = None) -> InequalityCheck:
    """Var(f) <= int f'^2 / (lambda_1^A + kappa) dmu + m_S(a g')^2 int S kappa dmu in one dimension.

    lambda_1^A defaults to the discrete gap of the reweighted measure on the
    same grid; it stands in for the gap restricted to weighted gradients,
    which can only be larger.
    """
    op, W, vals, df = _one_dim_setup(V, W, f, grid)
    x = op.nodes
    if lambda_1_A is None:
        lambda_1_A = weighted_gap_on_grid(V, W, 0, op.grid)
    sol = solve_poisson(op, vals)
    dg = grid_derivative_1d(op, sol.g)
    hp = W.g(x)[:, 0]
    kappa = curvature_matrix(V, W, x)[:, 0, 0]
    S = hp**2
    m_S = float(op.m @ (hp * dg)) / float(op.m @ S)
    rhs = float(op.m @ (df**2 / (lambda_1_A + kappa))) + m_S**2 * float(op.m @ (S * kappa))
    lhs = variance(op, vals)
    return InequalityCheck(lhs, rhs, rhs - lhs, 0, {"lambda_1_A": lambda_1_A, "m_S": m_S})


@dataclass
class JohnsenCheck:
    spec_scalar: np.ndarray
    spec_schrodinger: np.ndarray
    max_diff: float

    def as_dict(self) -> dict:
        return {"spec_scalar": self.spec_scalar.tolist(),
                "spec_schrodinger": self.spec_schrodinger.tolist(), "max_diff": self.max_diff}


def johnsen_check_1d(V: Potential, grid: Optional[Grid] = None, k: int = 5, seed: int = 0) -> JohnsenCheck:
    """Nonzero spectrum of -L against the bottom of -L + V'' (both on L^2(mu))."""
    if V.dim != 1:
        raise ValueError("johnsen_check_1d needs a one-dimensional potential")
    op = discretize(V, grid or Grid(1, 8.0, 4001))
    scalar = lowest_eigs(op, k + 1, seed=seed).eigenvalues[1:]
    schro = lowest_eigs(schrodinger_operator(op, V), k, seed=seed).eigenvalues
    return JohnsenCheck(scalar, schro, float(np.max(np.abs(scalar - schro))))
