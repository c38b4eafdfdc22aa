"""Analytic lower bounds on lambda_1 and lambda_{d+1}.

Four routes are provided:

* first order:   lambda_1      >= inf rho(C)
* Cordero:       lambda_{d+1}  >= lambda_1 + inf rho(Hess V)
* second order:  lambda_{d+1}  >= lambda_1^A + inf rho(C)
* product case:  lambda_1 >= gamma + c1 - c2^2/2,  lambda_{d+1} >= 2 gamma + c1 - c2^2/2

where C is the curvature matrix of a diagonal weight and lambda_1^A is
the minimum over coordinates of the gaps of the reweighted measures.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import DomainError, UnsupportedWeight
from .intertwine import grid_infimum, inf_rho, smallest_eigenvalue
from .model import DiagonalWeight, Potential, identity_weight, reweighted_potential

LAMBDA_1 = "lambda_1"
LAMBDA_D1 = "lambda_d_plus_1"

ANALYTIC = "analytic-closed-form"
GRID = "grid-infimum"
ORACLE = "oracle-eigensolve"


@dataclass
class Check:
    name: str
    passed: bool
    margin: float

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "margin": _finite(self.margin)}


@dataclass
class Constituent:
    value: float
    provenance: str

    def as_dict(self):
        return {"value": _finite(self.value), "provenance": self.provenance}


def _finite(x):
    if x is None:
        return None
    x = float(x)
    if np.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf" if x < 0 else "nan"


@dataclass
class BoundResult:
    """A lower bound with its hypothesis checks; ``value`` is None unless every check passed."""

    target: str
    method: str
    raw_value: float
    checks: list = field(default_factory=list)
    constituents: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def applicable(self) -> bool:
        return bool(np.isfinite(self.raw_value)) and all(c.passed for c in self.checks)

    @property
    def value(self) -> Optional[float]:
        return float(self.raw_value) if self.applicable else None

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "method": self.method,
            "applicable": self.applicable,
            "value": self.value,
            "raw_value": _finite(self.raw_value),
            "checks": [c.as_dict() for c in self.checks],
            "constituents": {k: v.as_dict() for k, v in self.constituents.items()},
            "notes": list(self.notes),
        }


def _diagonal(W, d):
    if W is None:
        return identity_weight(d)
    if not isinstance(W, DiagonalWeight):
        raise UnsupportedWeight("bounds need a diagonal weight")
    return W


def _curvature_checks(res, prefix="inf_rho"):
    return [
        Check(f"{prefix}_positive", res.value > 0, res.value),
        Check(f"{prefix}_attained_in_box", res.attained_inside, res.interior_min - res.boundary_min),
    ]


# ---------------------------------------------------------------------------
# first and second order bounds


def first_order_bound(V: Potential, W: Optional[DiagonalWeight] = None, box: float = 8.0,
                      grid_n: Optional[int] = None) -> BoundResult:
    """lambda_1 >= inf rho(C) for the curvature matrix C of the weight."""
    W = _diagonal(W, V.dim)
    res = inf_rho(V, W, box, grid_n)
    checks = _curvature_checks(res)
    if W.family == "identity" and V.hessian_floor() is not None:
        checks.append(Check("hessian_floor_positive", V.hessian_floor() > 0, V.hessian_floor()))
    return BoundResult(LAMBDA_1, f"first_order[{W.family}]", res.value, checks,
                       {"inf_rho": Constituent(res.value, GRID)},
                       [f"argmin {list(res.argmin)} on box radius {box}"])


def cordero_bound(V: Potential, lambda_1: float, box: float = 8.0, grid_n: Optional[int] = None,
                  lambda_1_provenance: str = ORACLE) -> BoundResult:
    """lambda_{d+1} >= lambda_1 + inf rho(Hess V)."""
    res = inf_rho(V, None, box, grid_n)
    checks = _curvature_checks(res, "inf_rho_hessian")
    floor = V.hessian_floor()
    if floor is not None:
        checks.append(Check("hessian_floor_positive", floor > 0, floor))
    checks.append(Check("lambda_1_positive", lambda_1 > 0, lambda_1))
    return BoundResult(LAMBDA_D1, "cordero", lambda_1 + res.value, checks,
                       {"lambda_1": Constituent(lambda_1, lambda_1_provenance),
                        "inf_rho_hessian": Constituent(res.value, GRID)})


def second_order_bound(V: Potential, W: Optional[DiagonalWeight], lambda_1_A: float, box: float = 8.0,
                       grid_n: Optional[int] = None, lambda_1_A_provenance: str = ORACLE) -> BoundResult:
    """lambda_{d+1} >= lambda_1^A + inf rho(C).

    lambda_1^A replaces the gap restricted to weighted gradients, which is
    never smaller, so the bound stays valid.
    """
    W = _diagonal(W, V.dim)
    res = inf_rho(V, W, box, grid_n)
    checks = _curvature_checks(res)
    checks.append(Check("lambda_1_A_positive", lambda_1_A > 0, lambda_1_A))
    return BoundResult(LAMBDA_D1, f"second_order[{W.family}]", lambda_1_A + res.value, checks,
                       {"lambda_1_A": Constituent(lambda_1_A, lambda_1_A_provenance),
                        "inf_rho": Constituent(res.value, GRID)},
                       ["lambda_1^A used in place of the gap restricted to weighted gradients"])


# ---------------------------------------------------------------------------
# reweighted measures and lambda_1^A


@dataclass(frozen=True)
class WeightedMeasureSpec:
    index: int
    potential: Potential
    weight_family: str


def weighted_potential(V: Potential, W: DiagonalWeight, i: int) -> WeightedMeasureSpec:
    """The measure with density proportional to S_ii e^{-V}."""
    W = _diagonal(W, V.dim)
    if not 0 <= i < V.dim:
        raise IndexError(f"index {i} outside 0..{V.dim - 1}")
    return WeightedMeasureSpec(i, reweighted_potential(V, W, i), W.family)


def weighted_gap(V: Potential, W: DiagonalWeight, i: int, method: str = "oracle", grid=None,
                 box: float = 8.0, seed: int = 0) -> float:
    """lambda_1^i: the spectral gap of S_ii dmu (index ``i`` is 0-based).

    ``oracle`` discretizes V - log S_ii and solves for the gap. ``analytic``
    returns min(min_{j != i} alpha_j, beta_i) for exp_eps_U weights, and the
    first-order bound of V for the identity weight.
    """
    W = _diagonal(W, V.dim)
    spec = weighted_potential(V, W, i)
    if method == "oracle":
        from .oracle import default_grid, weighted_gap_on_grid
        return weighted_gap_on_grid(V, W, i, grid or default_grid(V.dim), seed=seed)
    if method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    if W.family == "identity":
        return first_order_bound(spec.potential, None, box).raw_value
    if W.family != "exp_eps_U":
        raise UnsupportedWeight("analytic weighted gaps need exp_eps_U or identity weights")
    ab = alpha_beta(V, W.eps, box=box)
    others = [ab.alpha[j] for j in range(V.dim) if j != i]
    return float(min(others + [ab.beta[i]]))


def weighted_gaps(V, W, method="oracle", grid=None, box=8.0, seed=0) -> list:
    return [weighted_gap(V, W, i, method, grid, box, seed) for i in range(V.dim)]


def lambda_1_A(V: Potential, W: DiagonalWeight, method: str = "oracle", grid=None,
               box: float = 8.0, seed: int = 0) -> float:
    """min_i lambda_1^i; ties go to the smallest index."""
    return float(min(weighted_gaps(V, W, method, grid, box, seed)))


# ---------------------------------------------------------------------------
# perturbed product measures


def closed_form_inf_power(a: float, eps: float) -> float:
    """inf_y U''(y) + eps U'(y)^2 for U = |y|^a / a."""
    if not 1 < a < 2:
        raise DomainError(f"a must lie in (1, 2), got {a}")
    if not 0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")
    base = (2.0 - a) / (2.0 * eps)
    return (a - 1.0) * base ** (1.0 - 2.0 / a) + eps * base ** (2.0 - 2.0 / a)


def power_inf(a: float, p: float, q: float) -> float:
    """inf_{y>0} p U''(y) + q U'(y)^2 for U = |y|^a/a with p, q > 0 and 1 < a < 2."""
    # p(a-1) y^{a-2} + q y^{2a-2}; stationary where y^a = p(2-a)(a-1) / (2q(a-1))
    y = (p * (2.0 - a) / (2.0 * q)) ** (1.0 / a)
    return p * (a - 1.0) * y ** (a - 2.0) + q * y ** (2.0 * a - 2.0)


def inf_1d(fun, radius: float = 8.0, n: int = 4001):
    """Box infimum of a function of one real variable, puncturing the origin."""
    from .model import PUNCTURE_RADIUS
    return grid_infimum(lambda p: fun(p[:, 0]), 1, radius, n,
                        exclude=lambda p: np.abs(p[:, 0]) < PUNCTURE_RADIUS)


def _check_eps(eps, d):
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (d,)).copy()
    if np.any(eps <= 0) or np.any(eps >= 0.5):
        raise DomainError(f"every eps_i must lie in (0, 1/2), got {eps.tolist()}")
    return eps


def _require_product(V):
    if not V.has_product_structure:
        raise DomainError("this bound needs a potential with product structure")


def _interaction_constants(V):
    if V.interaction is None:
        return 0.0, 0.0
    return V.interaction.hessian_floor(V.dim), V.interaction.gradient_bound(V.dim)


def _component_inf(comp, p, q, box):
    """inf p U'' + q U'^2, closed form for power components, else a 1D box scan."""
    if comp.family == "power" and comp.exponent is not None and 1 < comp.exponent < 2 and p > 0 and q > 0:
        a = comp.exponent
        return power_inf(a, p * comp.scale, q * comp.scale**2), ANALYTIC
    res = inf_1d(lambda y: p * comp.d2(y) + q * comp.d1(y) ** 2, box)
    return res.value, GRID


@dataclass
class AlphaBeta:
    alpha: np.ndarray
    beta: np.ndarray
    c1: float
    c2: float
    route: str
    provenance: list

    @property
    def applicable(self) -> bool:
        return bool(np.all(self.alpha > 0) and np.all(self.beta > 0))

    def as_dict(self):
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist(), "c1": self.c1, "c2": self.c2,
                "route": self.route, "provenance": self.provenance, "applicable": self.applicable}


def alpha_beta(V: Potential, eps, box: float = 8.0, route: str = "separated",
               grid_n: Optional[int] = None) -> AlphaBeta:
    """Per-coordinate constants alpha_i, beta_i of the product-measure criterion.

    alpha_i = inf rho(Hess phi) - (d_i phi)^2/2 + (1-e)U'' + e(1-3e/2)U'^2
    beta_i  = same with U'' scaled by (1-2e) and U'^2 by (1-2e)^2

    ``separated`` replaces the interaction terms by the constants c1 and
    c2 and minimizes each coordinate alone; ``joint`` scans the box in d
    dimensions with the pointwise interaction terms.
    """
    _require_product(V)
    d = V.dim
    eps = _check_eps(eps, d)
    c1, c2 = _interaction_constants(V)
    alpha = np.empty(d)
    beta = np.empty(d)
    prov = []
    for i, (comp, e) in enumerate(zip(V.components, eps)):
        pa, qa = (1 - e), e * (1 - 1.5 * e)
        pb, qb = (1 - e) * (1 - 2 * e), e * (1 - 1.5 * e) * (1 - 2 * e) ** 2
        if route == "separated":
            ia, pra = _component_inf(comp, pa, qa, box)
            ib, prb = _component_inf(comp, pb, qb, box)
            alpha[i] = c1 - c2**2 / 2 + ia
            beta[i] = c1 - c2**2 / 2 + ib
            prov.append({"alpha": pra, "beta": prb})
        elif route == "joint":
            alpha[i] = _joint_inf(V, i, pa, qa, box, grid_n)
            beta[i] = _joint_inf(V, i, pb, qb, box, grid_n)
            prov.append({"alpha": GRID, "beta": GRID})
        else:
            raise ValueError(f"unknown route {route!r}")
    return AlphaBeta(alpha, beta, c1, c2, route, prov)


def _joint_inf(V, i, p, q, box, grid_n):
    comp = V.components[i]
    inter = V.interaction

    def fun(x):
        out = p * comp.d2(x[:, i]) + q * comp.d1(x[:, i]) ** 2
        if inter is not None:
            out = out + smallest_eigenvalue(inter.hessian(x)) - inter.gradient(x)[:, i] ** 2 / 2
        return out

    from .intertwine import default_inf_grid
    return grid_infimum(fun, V.dim, box, grid_n or default_inf_grid(V.dim), exclude=V.singular_mask).value


def gamma_constant(V: Potential, eps, box: float = 8.0):
    """gamma = min_i inf (1-3e_i/2)(1-2e_i)^2 (U_i'' + e_i U_i'^2), with per-coordinate values."""
    _require_product(V)
    eps = _check_eps(eps, V.dim)
    per = []
    prov = []
    for comp, e in zip(V.components, eps):
        val, pr = _gamma_term(comp, e, box)
        per.append(val)
        prov.append(pr)
    return float(min(per)), per, prov


def _gamma_term(comp, e, box):
    factor = (1 - 1.5 * e) * (1 - 2 * e) ** 2
    if comp.family == "power" and comp.scale == 1.0 and comp.exponent is not None and 1 < comp.exponent < 2:
        return factor * closed_form_inf_power(comp.exponent, e), ANALYTIC
    res = inf_1d(lambda y: comp.d2(y) + e * comp.d1(y) ** 2, box)
    return factor * res.value, GRID


def prop41(V: Potential, eps, box: float = 8.0):
    """Product-measure bounds (lambda_1, lambda_{d+1}) from gamma, c1 and c2."""
    _require_product(V)
    eps = _check_eps(eps, V.dim)
    c1, c2 = _interaction_constants(V)
    gamma, per, prov = gamma_constant(V, eps, box)
    convex = all(c.convex for c in V.components)
    base = gamma + c1 - c2**2 / 2
    checks = [
        Check("components_convex", convex, 0.0),
        Check("gamma_positive", gamma > 0, gamma),
        Check("bound_positive", base > 0, base),
    ]
    cons = {
        "gamma": Constituent(gamma, prov[int(np.argmin(per))]),
        "c_1": Constituent(c1, ANALYTIC),
        "c_2": Constituent(c2, ANALYTIC),
    }
    notes = [f"eps = {eps.tolist()}"]
    if V.interaction is not None:
        notes.append(f"interaction constants are the tau -> 0 values (tau = {V.interaction.tau:g})")
    b1 = BoundResult(LAMBDA_1, "prop41", base, list(checks), dict(cons), list(notes))
    b2 = BoundResult(LAMBDA_D1, "prop41", 2 * gamma + c1 - c2**2 / 2, list(checks), dict(cons), list(notes))
    return b1, b2


def product_second_order(V: Potential, eps, box: float = 8.0) -> BoundResult:
    """lambda_{d+1} >= min_i alpha_i + min_i min(min_{j != i} alpha_j, beta_i)."""
    ab = alpha_beta(V, eps, box=box)
    d = V.dim
    gaps = [min([ab.alpha[j] for j in range(d) if j != i] + [ab.beta[i]]) for i in range(d)]
    val = float(ab.alpha.min() + min(gaps))
    checks = [Check("alpha_positive", bool(np.all(ab.alpha > 0)), float(ab.alpha.min())),
              Check("beta_positive", bool(np.all(ab.beta > 0)), float(ab.beta.min()))]
    return BoundResult(LAMBDA_D1, "alpha_beta", val, checks,
                       {"min_alpha": Constituent(float(ab.alpha.min()), ab.provenance[0]["alpha"]),
                        "lambda_1_A": Constituent(float(min(gaps)), ab.provenance[0]["beta"])})


# ---------------------------------------------------------------------------
# choice of eps


EPS_LO, EPS_HI = 1e-3, 0.5 - 1e-3


def _coordinate_objective(V, i, objective, box):
    comp = V.components[i]
    c1, c2 = _interaction_constants(V)
    if objective == "gamma":
        return lambda e: _gamma_term(comp, e, box)[0]
    if objective == "lambda1_bound":
        return lambda e: c1 - c2**2 / 2 + _component_inf(comp, 1 - e, e * (1 - 1.5 * e), box)[0]
    raise ValueError(f"unknown objective {objective!r}")


def optimize_eps(V: Potential, objective: str = "gamma", box: float = 8.0, seeds: int = 64):
    """Maximize gamma (or the separated first-order bound min_i alpha_i) over eps.

    Each coordinate is handled alone: the best of a seed grid on
    [1e-3, 1/2 - 1e-3] is polished by golden-section search inside its two
    neighbouring cells. Returns (eps, objective value).
    """
    _require_product(V)
    grid = np.linspace(EPS_LO, EPS_HI, seeds)
    best_eps = np.empty(V.dim)
    best_val = np.empty(V.dim)
    for i in range(V.dim):
        obj = _coordinate_objective(V, i, objective, box)
        vals = np.array([obj(e) for e in grid])
        k = int(np.argmax(vals))
        e_star, v_star = grid[k], vals[k]
        if 0 < k < seeds - 1 and vals[k] > vals[k - 1] and vals[k] > vals[k + 1]:
            res = optimize.minimize_scalar(lambda e: -obj(e), bracket=(grid[k - 1], grid[k], grid[k + 1]),
                                           method="golden", tol=1e-10)
            if EPS_LO <= res.x <= EPS_HI and -res.fun > v_star:
                e_star, v_star = float(res.x), float(-res.fun)
        best_eps[i], best_val[i] = e_star, v_star
    return best_eps, float(best_val.min())
