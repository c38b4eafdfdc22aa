"""Central finite differences for vectorized fields on R^d.

Every function accepts points as arrays of shape ``(..., d)`` and evaluates
``fun`` on arrays of the same shape.
"""
import numpy as np

GRAD_STEP = 1e-5
HESS_STEP = 1e-4


def _shift(x, i, h):
    y = np.array(x, dtype=float, copy=True)
    y[..., i] += h
    return y


def gradient(fun, x, h=GRAD_STEP):
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    out = np.empty(x.shape)
    for i in range(d):
        out[..., i] = (fun(_shift(x, i, h)) - fun(_shift(x, i, -h))) / (2 * h)
    return out


def hessian(fun, x, h=HESS_STEP):
    """Nested central differences; exact symmetry by construction."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    out = np.empty(x.shape + (d,))
    for i in range(d):
        for j in range(i, d):
            pp = fun(_shift(_shift(x, i, h), j, h))
            pm = fun(_shift(_shift(x, i, h), j, -h))
            mp = fun(_shift(_shift(x, i, -h), j, h))
            mm = fun(_shift(_shift(x, i, -h), j, -h))
            out[..., i, j] = out[..., j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return out


def derivative(fun, y, h=GRAD_STEP):
    """First derivative of a scalar function of one variable."""
    y = np.asarray(y, dtype=float)
    return (fun(y + h) - fun(y - h)) / (2 * h)


def second_derivative(fun, y, h=HESS_STEP):
    y = np.asarray(y, dtype=float)
    return (fun(y + h) - 2 * fun(y) + fun(y - h)) / (h * h)
