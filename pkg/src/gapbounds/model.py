"""Potentials, one-dimensional components, interactions and diagonal weights.

All evaluators are vectorized: a point is an array whose last axis has
length ``d``, and any leading axes are treated as a batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import numdiff
from .errors import DomainError

# U'' of |y|^a/a blows up at 0 when a < 2.
D2_CAP = 1e12
CAP_RADIUS = 1e-12
PUNCTURE_RADIUS = 1e-9

Array = np.ndarray


def as_point(x, d: int) -> Array:
    """Validate a single point of R^d."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d,):
        raise DomainError(f"expected a point of dimension {d}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("point has non-finite coordinates")
    return x


def _check_batch(x, d: int) -> Array:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != d:
        raise DomainError(f"last axis must have length {d}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# one-dimensional components


@dataclass(frozen=True)
class OneDimComponent:
    """A convex-or-not potential U on the real line with U' and U''.

    ``inf_d2`` is the infimum of U'' over the whole line when it is known in
    closed form (``None`` otherwise); bounds use it to detect curvature that
    degenerates outside any finite box.
    """

    value: Callable[[Array], Array]
    d1: Callable[[Array], Array]
    d2: Callable[[Array], Array]
    family: str = "custom"
    exponent: Optional[float] = None
    convex: bool = True
    inf_d2: Optional[float] = None
    scale: float = 1.0
    label: str = ""

    @property
    def singular_at_zero(self) -> bool:
        return self.family == "power" and self.exponent is not None and self.exponent < 2

    def scaled(self, factor: float) -> "OneDimComponent":
        """The component ``factor * U``."""
        v, g, h = self.value, self.d1, self.d2
        return OneDimComponent(
            value=lambda y: factor * v(y),
            d1=lambda y: factor * g(y),
            d2=lambda y: factor * h(y),
            family=self.family,
            exponent=self.exponent,
            convex=self.convex if factor >= 0 else _sampled_convexity(lambda y: factor * h(y)),
            inf_d2=None if self.inf_d2 is None else factor * self.inf_d2 if factor >= 0 else None,
            scale=self.scale * factor,
            label=f"{factor:g}*({self.label})",
        )


def _sampled_convexity(d2, radius=10.0, n=2001) -> bool:
    y = np.linspace(-radius, radius, n)
    y = y[np.abs(y) > PUNCTURE_RADIUS]
    return bool(np.all(d2(y) >= 0))


def power_component(a: float) -> OneDimComponent:
    """U(y) = |y|^a / a."""
    if not a > 1:
        raise DomainError(f"power exponent must exceed 1, got {a}")

    def value(y):
        return np.abs(y) ** a / a

    def d1(y):
        y = np.asarray(y, dtype=float)
        return np.sign(y) * np.abs(y) ** (a - 1)

    def d2(y):
        y = np.asarray(y, dtype=float)
        ay = np.abs(y)
        if a >= 2:
            return (a - 1) * ay ** (a - 2)
        safe = np.where(ay < CAP_RADIUS, 1.0, ay)
        return np.where(ay < CAP_RADIUS, D2_CAP, (a - 1) * safe ** (a - 2))

    return OneDimComponent(
        value, d1, d2, family="power", exponent=float(a), convex=True,
        inf_d2=0.0 if a < 2 else (1.0 if a == 2 else None),
        label=f"|y|^{a:g}/{a:g}",
    )


def quadratic_component(k: float = 1.0) -> OneDimComponent:
    """U(y) = k y^2 / 2."""
    return OneDimComponent(
        value=lambda y: 0.5 * k * np.asarray(y, dtype=float) ** 2,
        d1=lambda y: k * np.asarray(y, dtype=float),
        d2=lambda y: np.full(np.shape(y), float(k)),
        family="quadratic",
        convex=k >= 0,
        inf_d2=float(k),
        label=f"{k:g}*y^2/2",
    )


def custom_component(value, d1=None, d2=None, label="custom", inf_d2=None) -> OneDimComponent:
    """Wrap user callables; missing derivatives come from central differences."""
    if d1 is None:
        d1 = lambda y: numdiff.derivative(value, y)  # noqa: E731
    if d2 is None:
        d2 = lambda y: numdiff.second_derivative(value, y)  # noqa: E731
    return OneDimComponent(
        value, d1, d2, family="custom", convex=_sampled_convexity(d2),
        inf_d2=inf_d2, label=label,
    )


# ---------------------------------------------------------------------------
# interaction


@dataclass(frozen=True)
class InteractionTerm:
    """Smoothed cyclic nearest-neighbour interaction

        phi(x) = c * sum_i sqrt(tau^2 + (x_{i+1} - x_i)^2),   x_{d+1} = x_1.
    """

    tau: float
    coupling: float

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"smoothing tau must be positive, got {self.tau}")
        if self.coupling < 0:
            raise DomainError(f"coupling must be non-negative, got {self.coupling}")

    def _diffs(self, x):
        return np.roll(x, -1, axis=-1) - x

    def value(self, x):
        x = np.asarray(x, dtype=float)
        D = self._diffs(x)
        return self.coupling * np.sqrt(self.tau**2 + D**2).sum(axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        D = self._diffs(x)
        s = D / np.sqrt(self.tau**2 + D**2)
        # term i depends on x_{i+1} (+) and x_i (-)
        return self.coupling * (np.roll(s, 1, axis=-1) - s)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        D = self._diffs(x)
        w = self.coupling * self.tau**2 / (self.tau**2 + D**2) ** 1.5
        H = np.zeros(x.shape + (d,))
        for i in range(d):
            j = (i + 1) % d
            if j == i:
                continue
            wi = w[..., i]
            H[..., i, i] += wi
            H[..., j, j] += wi
            H[..., i, j] -= wi
            H[..., j, i] -= wi
        return H

    def hessian_floor(self, d: int) -> float:
        """inf rho(Hess phi): zero, since phi is convex and translation invariant."""
        return 0.0

    def gradient_bound(self, d: int) -> float:
        """max_i sup |d_i phi|; each coordinate sits in two terms of size <= c."""
        return 0.0 if d == 1 else 2.0 * self.coupling

    def nonsmooth_value(self, x):
        """The tau -> 0 limit c * sum |x_{i+1} - x_i|."""
        x = np.asarray(x, dtype=float)
        return self.coupling * np.abs(self._diffs(x)).sum(axis=-1)


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    dim: int
    family: str
    _value: Callable[[Array], Array] = field(repr=False)
    _gradient: Callable[[Array], Array] = field(repr=False)
    _hessian: Callable[[Array], Array] = field(repr=False)
    components: Optional[tuple] = None
    interaction: Optional[InteractionTerm] = None
    params: dict = field(default_factory=dict)

    def value(self, x):
        return self._value(_check_batch(x, self.dim))

    def gradient(self, x):
        return self._gradient(_check_batch(x, self.dim))

    def hessian(self, x):
        return self._hessian(_check_batch(x, self.dim))

    @property
    def has_product_structure(self) -> bool:
        return self.components is not None

    def singular_mask(self, x):
        """Points inside the puncture around a singular coordinate of a power component."""
        x = _check_batch(x, self.dim)
        mask = np.zeros(x.shape[:-1], dtype=bool)
        if self.components is None:
            return mask
        for i, comp in enumerate(self.components):
            if comp.singular_at_zero:
                mask |= np.abs(x[..., i]) < PUNCTURE_RADIUS
        return mask

    def hessian_floor(self) -> Optional[float]:
        """A closed-form lower bound on inf rho(Hess V) over R^d, when available.

        For power components this is 0, and the infimum really is 0
        (approached at infinity), which marks the potential as not uniformly
        convex.
        """
        if self.components is None:
            return 1.0 if self.family == "gaussian" else None
        floors = [c.inf_d2 for c in self.components]
        if any(f is None for f in floors):
            return None
        extra = 0.0 if self.interaction is None else self.interaction.hessian_floor(self.dim)
        return min(floors) + extra

    def describe(self) -> dict:
        return {"family": self.family, "dim": self.dim, **self.params}


def make_product(components, interaction=None, family="product_perturbed", params=None) -> Potential:
    """V(x) = sum_i U_i(x_i) + phi(x)."""
    comps = tuple(components)
    d = len(comps)
    if d < 1:
        raise DomainError("need at least one component")

    def value(x):
        out = sum(c.value(x[..., i]) for i, c in enumerate(comps))
        if interaction is not None:
            out = out + interaction.value(x)
        return out

    def gradient(x):
        g = np.stack([c.d1(x[..., i]) for i, c in enumerate(comps)], axis=-1)
        if interaction is not None:
            g = g + interaction.gradient(x)
        return g

    def hessian(x):
        diag = np.stack([c.d2(x[..., i]) for i, c in enumerate(comps)], axis=-1)
        H = np.zeros(x.shape + (d,))
        idx = np.arange(d)
        H[..., idx, idx] = diag
        if interaction is not None:
            H = H + interaction.hessian(x)
        return H

    return Potential(d, family, value, gradient, hessian, comps, interaction, dict(params or {}))


def make_gaussian(d: int) -> Potential:
    """Standard Gaussian potential |x|^2 / 2."""
    if d < 1:
        raise DomainError("dimension must be at least 1")
    pot = make_product([quadratic_component(1.0)] * d, None, family="gaussian")
    return pot


def make_power_product(d: int, a: float, c: float, tau: float) -> Potential:
    """sum_i |x_i|^a / a + c sum_i sqrt(tau^2 + (x_{i+1} - x_i)^2)."""
    if d < 1:
        raise DomainError("dimension must be at least 1")
    if not 1 < a < 2:
        raise DomainError(f"power exponent a must lie in (1, 2), got {a}")
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    if c < 0:
        raise DomainError(f"coupling c must be non-negative, got {c}")
    comp = power_component(a)
    inter = InteractionTerm(tau=float(tau), coupling=float(c))
    return make_product([comp] * d, inter, family="product_perturbed",
                        params={"a": float(a), "c": float(c), "tau": float(tau)})


def make_custom(d: int, value, gradient=None, hessian=None, params=None) -> Potential:
    """A potential given only by callables; derivatives default to central differences."""
    if gradient is None:
        gradient = lambda x: numdiff.gradient(value, x)  # noqa: E731
    if hessian is None:
        hessian = lambda x: numdiff.hessian(value, x)  # noqa: E731
    return Potential(d, "custom", value, gradient, hessian, None, None, dict(params or {}))


# ---------------------------------------------------------------------------
# diagonal weights


@dataclass(frozen=True)
class WeightComponent:
    """g = h', with g' = h'' and g'' = h''' on one coordinate."""

    g: Callable[[Array], Array]
    dg: Callable[[Array], Array]
    d2g: Callable[[Array], Array]


def _identity_part():
    one = lambda y: np.ones(np.shape(y))  # noqa: E731
    zero = lambda y: np.zeros(np.shape(y))  # noqa: E731
    return WeightComponent(one, zero, zero)


def _exp_part(comp: OneDimComponent, eps: float) -> WeightComponent:
    def g(y):
        return np.exp(eps * comp.value(y))

    def dg(y):
        return eps * comp.d1(y) * g(y)

    def d2g(y):
        u1 = comp.d1(y)
        return (eps * comp.d2(y) + eps**2 * u1**2) * g(y)

    return WeightComponent(g, dg, d2g)


@dataclass(frozen=True)
class DiagonalWeight:
    """H_i(x) = h_i(x_i); the induced A = diag(1/h_i') and S = diag(h_i'^2)."""

    dim: int
    family: str
    parts: tuple = field(repr=False)
    eps: Optional[tuple] = None

    def _apply(self, name, x):
        x = _check_batch(x, self.dim)
        return np.stack([getattr(p, name)(x[..., i]) for i, p in enumerate(self.parts)], axis=-1)

    def g(self, x):
        return self._apply("g", x)

    def dg(self, x):
        return self._apply("dg", x)

    def d2g(self, x):
        return self._apply("d2g", x)

    def antiderivative(self, i: int, y: float) -> float:
        """h_i(y) = int_0^y g_i(t) dt."""
        if self.family == "identity":
            return float(y)
        val, _ = integrate.quad(lambda t: float(self.parts[i].g(np.asarray(t))), 0.0, float(y),
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return val

    def A(self, x):
        """diag(1 / h_i')."""
        return _diag(1.0 / self.g(x))

    def S(self, x):
        """diag(h_i'^2)."""
        return _diag(self.g(x) ** 2)

    def describe(self) -> dict:
        out = {"family": self.family}
        if self.eps is not None:
            out["eps"] = list(self.eps)
        return out


def _diag(v):
    d = v.shape[-1]
    M = np.zeros(v.shape + (d,))
    idx = np.arange(d)
    M[..., idx, idx] = v
    return M


def identity_weight(d: int) -> DiagonalWeight:
    return DiagonalWeight(d, "identity", tuple(_identity_part() for _ in range(d)))


def make_weight(potential: Potential, family: str = "identity", eps=None) -> DiagonalWeight:
    """Build a diagonal weight; ``exp_eps_U`` uses h_i' = exp(eps_i U_i)."""
    d = potential.dim
    if family == "identity":
        return identity_weight(d)
    if family != "exp_eps_U":
        raise DomainError(f"unknown weight family {family!r}")
    if not potential.has_product_structure:
        raise DomainError("exp_eps_U weights need a potential with product structure")
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (d,))
    if np.any(eps <= 0) or np.any(eps >= 0.5):
        raise DomainError(f"every eps_i must lie in (0, 1/2), got {eps.tolist()}")
    parts = tuple(_exp_part(c, float(e)) for c, e in zip(potential.components, eps))
    return DiagonalWeight(d, "exp_eps_U", parts, tuple(float(e) for e in eps))


def custom_weight(parts) -> DiagonalWeight:
    """Weight from explicit per-coordinate (g, g', g'') triples."""
    parts = tuple(p if isinstance(p, WeightComponent) else WeightComponent(*p) for p in parts)
    return DiagonalWeight(len(parts), "custom", parts)


def reweighted_potential(V: Potential, W: DiagonalWeight, i: int) -> Potential:
    """V - log S_ii = V - 2 log h_i'(x_i), the potential of the measure S_ii dmu."""
    if W.family == "identity":
        return V
    if W.family == "exp_eps_U" and V.has_product_structure:
        comps = list(V.components)
        comps[i] = comps[i].scaled(1.0 - 2.0 * W.eps[i])
        return make_product(comps, V.interaction, family="reweighted",
                            params={**V.params, "reweighted_index": i})
    part = W.parts[i]

    def value(x):
        return V.value(x) - 2.0 * np.log(part.g(x[..., i]))

    def gradient(x):
        out = np.array(V.gradient(x), copy=True)
        y = x[..., i]
        out[..., i] -= 2.0 * part.dg(y) / part.g(y)
        return out

    def hessian(x):
        out = np.array(V.hessian(x), copy=True)
        y = x[..., i]
        g, dg = part.g(y), part.dg(y)
        out[..., i, i] -= 2.0 * (part.d2g(y) / g - (dg / g) ** 2)
        return out

    return Potential(V.dim, "reweighted", value, gradient, hessian, None, None,
                     {**V.params, "reweighted_index": i})
