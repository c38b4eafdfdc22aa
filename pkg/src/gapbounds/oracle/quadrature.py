"""mu-integrals as node-mass sums, and grid derivatives of node functions."""
import numpy as np

from ..errors import SingularMass
from .operator import DiscreteOperator


def integrate(op: DiscreteOperator, f) -> float:
    return float(op.m @ np.asarray(f, dtype=float))


def variance(op: DiscreteOperator, f) -> float:
    f = np.asarray(f, dtype=float)
    mean = integrate(op, f)
    return float(op.m @ (f - mean) ** 2)


def covariance(op: DiscreteOperator, f, g) -> float:
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    return float(op.m @ ((f - integrate(op, f)) * (g - integrate(op, g))))


def weighted_mean_mS(op: DiscreteOperator, S, F):
    """m_S(F) = (int S dmu)^{-1} int S F dmu for a diagonal S given as an (N, d) array."""
    S = np.asarray(S, dtype=float)
    F = np.asarray(F, dtype=float)
    mass = op.m @ S
    if np.any(mass <= 1e-300):
        raise SingularMass("int S_ii dmu vanishes")
    return (op.m @ (S * F)) / mass


def grid_gradient(op: DiscreteOperator, f):
    """Second-order central differences (one-sided at the faces), shape (N, d)."""
    full = op.to_full(np.asarray(f, dtype=float))
    h = op.grid.h
    grads = np.gradient(full, h, edge_order=2) if op.grid.dim > 1 else [np.gradient(full, h, edge_order=2)]
    return np.stack([g.ravel()[op.active] for g in grads], axis=-1)


def grid_derivative_1d(op: DiscreteOperator, f):
    """d/dx of a node function on a one-dimensional grid."""
    return grid_gradient(op, f)[:, 0]
