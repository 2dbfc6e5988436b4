"""Capacity-measure optimization of piecewise linear LLR parameters.

The inner problem (coefficients at fixed region boundaries) is concave, so
gradient ascent with backtracking on a frozen sample set finds its global
maximum; region boundaries are handled by an outer golden-section search.
Common random numbers (one frozen draw of channel outputs reused for every
candidate) make the surrogate objective deterministic and exactly concave.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .measure import Estimate, draw_conditioned, _softplus2
from .llr import true_nocsi_functions

__all__ = [
    "OptimizationProblem",
    "OptimizationResult",
    "FrozenObjective",
    "optimize_inner",
    "optimize_boundaries",
    "concavity_probe",
]

_LN2 = math.log(2.0)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULT_BOUNDARY_RANGE = (-5.0, -1e-3)


@dataclass
class OptimizationProblem:
    """Template plus the Monte-Carlo context its objective is estimated in."""

    template: object
    const: object
    spec: object
    n_samples: int = 200_000
    seed: int = 0
    boundary_range: dict = field(default_factory=dict)

    @property
    def bit_index(self):
        return self.template.bit_index


@dataclass
class OptimizationResult:
    params: dict
    template: object          # bound template
    c_hat: Estimate
    trace: list
    converged: bool
    iterations: int


class LineSearchError(RuntimeError):
    pass


class FrozenObjective:
    """Frozen-sample capacity objective for one bit channel.

    The channel draws are made once from the problem seed; every candidate
    parameter vector (and boundary) is evaluated on the same samples.
    """

    def __init__(self, prob):
        self.prob = prob
        (y0, _), (y1, _) = draw_conditioned(
            prob.const, prob.spec, prob.bit_index, prob.n_samples, prob.seed
        )
        self.y0 = y0
        self.y1 = y1
        self._true_vals = None

    def at_boundary(self, **bvals):
        tmpl = self.prob.template
        if bvals:
            tmpl = tmpl.with_boundary(**bvals)
        return _BoundObjective(tmpl, self.y0, self.y1)

    def true_llr_values(self):
        """True no-CSI LLR at the frozen samples (least-squares init target)."""
        if self._true_vals is None:
            f = true_nocsi_functions(self.prob.const, self.prob.spec)[
                self.prob.bit_index - 1
            ]
            self._true_vals = (f(self.y0), f(self.y1))
        return self._true_vals


class _BoundObjective:
    """Objective/gradient at fixed boundaries, affine design precomputed."""

    def __init__(self, template, y0, y1):
        self.template = template
        self.phi0, self.psi0 = template.design(y0)
        self.phi1, self.psi1 = template.design(y1)
        self.n0 = len(y0)
        self.n1 = len(y1)

    def value(self, theta):
        u0 = self.phi0 @ theta + self.psi0
        u1 = self.phi1 @ theta + self.psi1
        return 1.0 - 0.5 * _softplus2(-u0).mean() - 0.5 * _softplus2(u1).mean()

    def value_and_grad(self, theta):
        u0 = self.phi0 @ theta + self.psi0
        u1 = self.phi1 @ theta + self.psi1
        val = 1.0 - 0.5 * _softplus2(-u0).mean() - 0.5 * _softplus2(u1).mean()
        # d/du [-log2(1+e^-u)] = sigmoid(-u)/ln2 ; b=1 term mirrors with -sigmoid(u)
        g = self.phi0.T @ expit(-u0) / (2.0 * self.n0 * _LN2)
        g -= self.phi1.T @ expit(u1) / (2.0 * self.n1 * _LN2)
        return val, g

    def estimate(self, theta):
        """Objective value with the Monte-Carlo standard error attached."""
        t0 = _softplus2(-(self.phi0 @ theta + self.psi0))
        t1 = _softplus2(self.phi1 @ theta + self.psi1)
        val = 1.0 - 0.5 * t0.mean() - 0.5 * t1.mean()
        var = 0.25 * t0.var() / self.n0 + 0.25 * t1.var() / self.n1
        return Estimate(float(val), float(np.sqrt(var)))

    def ls_fit(self, l0, l1):
        """Least-squares fit of the template to target LLR values."""
        phi = np.vstack([self.phi0, self.phi1])
        rhs = np.concatenate([l0 - self.psi0, l1 - self.psi1])
        theta, *_ = np.linalg.lstsq(phi, rhs, rcond=None)
        return theta


def _ascend(obj, theta0, grad_tol=1e-6, max_iter=500, max_halvings=60):
    """Backtracking gradient ascent; returns (theta, trace, converged, iters)."""
    theta = np.asarray(theta0, dtype=float).copy()
    val, grad = obj.value_and_grad(theta)
    if not np.isfinite(val):
        raise FloatingPointError("non-finite objective at the initial point")
    trace = [val]
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gnorm2 = float(grad @ grad)
        if math.sqrt(gnorm2) < grad_tol:
            converged = True
            break
        t = step
        for _ in range(max_halvings):
            cand = theta + t * grad
            cval = obj.value(cand)
            if np.isfinite(cval) and cval >= val + 1e-4 * t * gnorm2:
                break
            t *= 0.5
        else:
            raise LineSearchError(f"line search failed after {max_halvings} halvings")
        theta = cand
        val, grad = obj.value_and_grad(theta)
        trace.append(val)
        step = min(t * 2.0, 1e6)
    return theta, trace, converged, it


def optimize_inner(prob, frozen=None, boundaries=None, theta0=None,
                   grad_tol=1e-6, max_iter=500):
    """Maximize the frozen-sample capacity over free coefficients.

    ``boundaries`` overrides the template's boundary parameters.  The frozen
    objective is concave, so the result is its global maximum up to the
    gradient tolerance.
    """
    frozen = FrozenObjective(prob) if frozen is None else frozen
    obj = frozen.at_boundary(**(boundaries or {}))
    if theta0 is None:
        theta0 = obj.ls_fit(*frozen.true_llr_values())
    theta, trace, converged, iters = _ascend(obj, theta0, grad_tol, max_iter)
    bound = obj.template.bind(theta)
    return OptimizationResult(bound.param_dict(), bound, obj.estimate(theta),
                              trace, converged, iters)


def optimize_boundaries(prob, frozen=None, tol=1e-3, grad_tol=1e-6):
    """Golden-section search over a single region boundary, inner solve each.

    The frozen-sample objective as a function of the boundary is assumed
    unimodal on the search range.
    """
    names = prob.template.boundary_names
    if not names:
        raise ValueError("template has no boundary parameters to search")
    if len(names) > 1:
        raise NotImplementedError("only single-boundary search is implemented")
    name = names[0]
    lo, hi = prob.boundary_range.get(name, DEFAULT_BOUNDARY_RANGE)
    if lo > hi:
        raise ValueError(f"empty search range for {name}: ({lo}, {hi})")
    frozen = FrozenObjective(prob) if frozen is None else frozen
    warm = {"theta": None}

    def solve(c):
        res = optimize_inner(prob, frozen, {name: c}, theta0=warm["theta"],
                             grad_tol=grad_tol)
        # warm-start the next boundary candidate from this solution; the
        # optimum moves continuously with the boundary
        warm["theta"] = np.array(
            [res.params[n] for n in prob.template.param_names])
        return res

    if hi - lo < 1e-12:
        return solve(lo)

    a, b = lo, hi
    c1 = b - GOLDEN * (b - a)
    c2 = a + GOLDEN * (b - a)
    r1, r2 = solve(c1), solve(c2)
    while b - a > tol:
        if r1.c_hat.value >= r2.c_hat.value:
            b, c2, r2 = c2, c1, r1
            c1 = b - GOLDEN * (b - a)
            r1 = solve(c1)
        else:
            a, c1, r1 = c1, c2, r2
            c2 = a + GOLDEN * (b - a)
            r2 = solve(c2)
    return r1 if r1.c_hat.value >= r2.c_hat.value else r2


def concavity_probe(prob, n_pairs=100, seed=1234, box=2.0, tol=1e-9):
    """Midpoint-concavity check of the frozen-sample objective.

    Draws random parameter pairs in [-box, box]^P and verifies
    f((t1+t2)/2) >= (f(t1)+f(t2))/2 - tol exactly (shared samples, no MC
    noise).  Returns a report dict whose 'violations' list must be empty.
    """
    frozen = FrozenObjective(prob)
    obj = frozen.at_boundary()
    rng = np.random.default_rng(seed)
    p = prob.template.n_params
    violations = []
    worst = np.inf
    for _ in range(n_pairs):
        t1 = rng.uniform(-box, box, p)
        t2 = rng.uniform(-box, box, p)
        gap = obj.value(0.5 * (t1 + t2)) - 0.5 * (obj.value(t1) + obj.value(t2))
        worst = min(worst, gap)
        if gap < -tol:
            violations.append({"theta1": t1.tolist(), "theta2": t2.tolist(), "gap": gap})
    return {"pairs": n_pairs, "violations": violations, "min_gap": worst}
