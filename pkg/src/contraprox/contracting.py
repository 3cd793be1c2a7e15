"""Contracting proximal outer loop with certified inexact inner solves.

Each outer iteration minimizes the contracted objective
    h_{k+1}(x) = A_{k+1} f((a_{k+1} x + A_k x_k)/A_{k+1}) + a_{k+1} psi(x)
               + gamma_k * divergence(v_k; x)
to a subgradient of dual norm at most delta_{k+1}, then moves along the
segment [x_k, v_{k+1}].  Coefficient schedules, inner-accuracy schedules, the
runtime certificate bound and the order-dependence formulas all live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bregman import ProxFunction
from .metric import Metric
from .objectives import CompositeObjective, SolverError
from .tensor_steps import (CompositePart, ContractedSmooth, InnerResult,
                           Subproblem, exact_quadratic_inner, inner_loop)
from .trace import IterationRecord, RunTrace


@dataclass
class OuterState:
    """Full state of the outer loop after k iterations."""

    k: int
    A: float
    gamma: float
    x: np.ndarray
    v: np.ndarray


class SublinearSchedule:
    """a_{k+1} = c (p+1) (k+1)^p, so A_k grows like c*k^{p+1}."""

    kind = "sublinear"

    def __init__(self, c, p):
        if c <= 0:
            raise ValueError("c must be positive")
        self.c = float(c)
        self.p = int(p)

    def next_a(self, k, A):
        return self.c * (self.p + 1) * (k + 1) ** self.p

    def lower(self, k):
        return self.c * k ** (self.p + 1)

    def upper(self, k):
        return self.c * (k + 1) ** (self.p + 1)

    def describe(self):
        return {"kind": self.kind, "c": self.c, "p": self.p}


class GeometricSchedule:
    """a_{k+1} = omega/(1-omega) * A_k after a sublinear first coefficient."""

    kind = "geometric"

    def __init__(self, omega, c, p):
        if not 0.0 < omega <= 0.5:
            raise ValueError("omega must lie in (0, 1/2]")
        if c <= 0:
            raise ValueError("c must be positive")
        self.omega = float(omega)
        self.c = float(c)
        self.p = int(p)

    def next_a(self, k, A):
        if k == 0:
            return self.c * (self.p + 1)
        return self.omega / (1.0 - self.omega) * A

    def describe(self):
        return {"kind": self.kind, "omega": self.omega, "c": self.c, "p": self.p}


class CustomSchedule:
    kind = "custom"

    def __init__(self, fn, p, description="custom"):
        self.fn = fn
        self.p = int(p)
        self.description = description

    def next_a(self, k, A):
        return float(self.fn(k, A))

    def describe(self):
        return {"kind": self.kind, "p": self.p, "description": self.description}


def schedule_constant(p, gamma0, lipschitz):
    """The growth constant c = p! gamma0 / (2^{p-1} (p+1)^{p+2} L_p(f))."""
    return math.factorial(p) * gamma0 / (2.0 ** (p - 1) * (p + 1) ** (p + 2) * lipschitz)


def schedule_convex(p, gamma0, lipschitz):
    """Sublinear coefficient schedule keeping the inner condition ratio at most 1."""
    if gamma0 <= 0 or lipschitz <= 0:
        raise ValueError("gamma0 and the Lipschitz constant must be positive")
    return SublinearSchedule(schedule_constant(p, gamma0, lipschitz), p)


def contraction_rate(p, sigma, lipschitz):
    """omega = min{ (sigma p! / (L_p (p+1) 2^{p-1}))^{1/(p+1)}, 1/2 }."""
    return min((sigma * math.factorial(p) / (lipschitz * (p + 1) * 2.0 ** (p - 1)))
               ** (1.0 / (p + 1)), 0.5)


def schedule_strongly_convex(p, sigma, lipschitz, gamma0=1.0):
    """Geometric coefficient schedule for psi strongly convex relative to d."""
    if sigma <= 0:
        raise ValueError("sigma must be positive for the geometric schedule")
    omega = contraction_rate(p, sigma, lipschitz)
    return GeometricSchedule(omega, schedule_constant(p, gamma0, lipschitz), p)


class ConstantDelta:
    kind = "constant"

    def __init__(self, delta):
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.delta = float(delta)

    def resolve(self, run):
        return lambda k: self.delta

    def describe(self):
        return {"kind": self.kind, "delta": self.delta}


class PowerDelta:
    """delta_k = c / k^s with s > 1, so the accuracy series stays summable."""

    kind = "power"

    def __init__(self, c=1.0, s=2.0):
        if c <= 0:
            raise ValueError("c must be positive")
        if s <= 1:
            raise ValueError("s must exceed 1 for a summable accuracy series")
        self.c = float(c)
        self.s = float(s)

    def resolve(self, run):
        return lambda k: self.c / k ** self.s

    def describe(self):
        return {"kind": self.kind, "c": self.c, "s": self.s}


class TheoremConvexDelta:
    """The fixed accuracy that certifies the target residual in the convex case."""

    kind = "theorem_convex"

    def __init__(self, eps):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps = float(eps)

    def resolve(self, run):
        delta = convex_inner_accuracy(run["p"], run["gamma0"], run["lipschitz"], self.eps)
        return lambda k: delta

    def describe(self):
        return {"kind": self.kind, "eps": self.eps}


class TheoremStronglyConvexDelta:
    kind = "theorem_strongly_convex"

    def __init__(self, eps):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps = float(eps)

    def resolve(self, run):
        delta = strongly_convex_inner_accuracy(
            run["p"], run["gamma0"], run["lipschitz"], run["omega"], self.eps)
        return lambda k: delta

    def describe(self):
        return {"kind": self.kind, "eps": self.eps}


def contraction_point(a, A_prev, v, x_prev):
    """x_{k+1} = (a v + A_prev x_prev) / (A_prev + a)."""
    if a <= 0:
        raise ValueError("a must be positive")
    return (a * np.asarray(v, float) + A_prev * np.asarray(x_prev, float)) / (A_prev + a)


def inexact_certificate_bound(p, gamma0, sigma_simple, bregman0, sigma_uniform,
                              deltas, A_values):
    """Certified upper bound on the residual-plus-divergence sum after k steps.

    ``deltas[i]`` is the dual norm certified at iteration i+1 and
    ``A_values[i]`` the corresponding A_{i+1}; gamma_i is reconstructed from
    its telescoped form gamma0 + sigma_simple * A_i.
    """
    deltas = np.asarray(deltas, dtype=float)
    A_values = np.asarray(A_values, dtype=float)
    if deltas.shape != A_values.shape:
        raise ValueError("deltas and A_values must have matching lengths")
    gammas = gamma0 + sigma_simple * A_values
    acc = float(np.sum(deltas / gammas ** (1.0 / (p + 1))))
    head = (gamma0 * bregman0) ** (p / (p + 1.0))
    tail = ((p + 1.0) / sigma_uniform) ** (1.0 / (p + 1)) * acc
    return (head + tail) ** ((p + 1.0) / p)


def convex_inner_accuracy(p, gamma0, lipschitz, eps):
    """Inner accuracy certifying an eps-residual under the sublinear schedule."""
    return ((math.factorial(p) * eps / lipschitz) ** (p / (p + 1.0))
            * gamma0 / (2.0 ** p * (p + 1) ** (p + 1)))


def complexity_convex(p, gamma0, lipschitz, bregman0, eps):
    """(delta, K, oracle bound) for the convex case at target residual eps."""
    if min(p, gamma0, lipschitz, bregman0, eps) <= 0:
        raise ValueError("all arguments must be positive")
    delta = convex_inner_accuracy(p, gamma0, lipschitz, eps)
    K = math.floor(1.0 + 2.0 ** (1.0 / p) * (
        2.0 ** (p - 1) * (p + 1) ** (p + 2) * lipschitz * bregman0
        / (eps * math.factorial(p))) ** (1.0 / (p + 1)))
    nk = K * (3.0 + (p + 1.0) / p * math.log(
        4.0 * (1.0 + 1.0 / gamma0) * (p + 1) ** (1.0 / p) * K ** p))
    return delta, K, nk


def strongly_convex_inner_accuracy(p, gamma0, lipschitz, omega, eps):
    return ((math.factorial(p) * eps / lipschitz) ** (p / (p + 1.0))
            * gamma0 * p * omega
            / (2.0 ** p * (p + 1) ** (((p + 1) ** 2 + 1.0) / (p + 1))))


def strongly_convex_log_term(p, lipschitz, bregman0, omega, eps):
    return math.log(max(
        (p + 1.0) ** p / omega ** (p + 1),
        lipschitz * bregman0 * (p + 1) ** (p + 1) * 2.0 ** (p + 1.0 / p)
        / (math.factorial(p) * eps)))


def geometric_iteration_count(omega, log_term):
    """K = floor(2 + log_term / omega), the geometric-phase iteration budget."""
    return math.floor(2.0 + log_term / omega)


def complexity_strongly_convex(p, gamma0, lipschitz, sigma, bregman0, eps):
    """(delta, K, oracle bound) for psi strongly convex relative to d."""
    if min(p, gamma0, lipschitz, bregman0, eps) <= 0 or sigma <= 0:
        raise ValueError("all arguments must be positive")
    omega = contraction_rate(p, sigma, lipschitz)
    delta = strongly_convex_inner_accuracy(p, gamma0, lipschitz, omega, eps)
    lterm = strongly_convex_log_term(p, lipschitz, bregman0, omega, eps)
    K = geometric_iteration_count(omega, lterm)
    e = math.e
    nk = K * (3.0 + (1.0 + e / ((e - 1.0) * p)) * (1.0 + lterm) + math.log(
        max(1.0, (4.0 * sigma * math.factorial(p) / ((p + 1) * lipschitz)) ** (1.0 / p))
        * (1.0 + 1.0 / gamma0)
        * (p + 1.0) ** ((p + 2.0) / p) / p ** ((p + 1.0) / p)
        * 2.0 ** ((2.0 * p * p + p + 4.0) / p)))
    return delta, K, nk


def order_dependence(p):
    """(delta(p), K(p)) with the ratio L/eps, the initial divergence and gamma0
    all normalized to one; shows how the inner accuracy and the iteration count
    react to the method's order."""
    delta = math.factorial(p) ** (p / (p + 1.0)) / (2.0 ** p * (p + 1) ** (p + 1))
    K = 1.0 + 2.0 ** (1.0 / p) * (
        2.0 ** (p - 1) * (p + 1) ** (p + 2) / math.factorial(p)) ** (1.0 / (p + 1))
    return delta, K


def inner_condition_ratio(p, lipschitz_g, gamma_next, sigma_uniform):
    """ell/mu, the condition ratio that prices one inner solve."""
    ell = ((p + 1) * lipschitz_g / math.factorial(p)) ** (1.0 / p)
    mu = (gamma_next * sigma_uniform) ** (1.0 / p)
    return ell / mu


def inner_iteration_bound(p, lipschitz_g, gamma_next, sigma_uniform, delta, D):
    """Sufficient inner-step count for a delta-small subgradient (log clamped at 0)."""
    ell = ((p + 1) * lipschitz_g / math.factorial(p)) ** (1.0 / p)
    mu = (gamma_next * sigma_uniform) ** (1.0 / p)
    if D <= 0 or delta <= 0:
        return 2.0
    log_arg = ell * D / delta ** ((p + 1.0) / p)
    term = math.log(log_arg) if log_arg > 1.0 else 0.0
    return 2.0 + max(1.0, ell / mu) * (p + 1.0) / p * term


@dataclass
class RunCaps:
    outer: int = 1000
    inner: int | None = None        # explicit override of the per-iteration cap
    inner_floor: int = 200          # fallback cap when the bound is not computable
    inner_slack: float = 4.0        # multiple of the computable bound
    subproblem: int = 20000


def _resolve_inner_cap(caps, p, lipschitz_g, gamma, gamma_next, sigma_uniform,
                       delta, prox, v, residual_term, xstar):
    if caps.inner is not None:
        return caps.inner
    if xstar is None or not math.isfinite(residual_term):
        return caps.inner_floor
    div = prox.divergence(v, xstar)
    ell_mu = inner_condition_ratio(p, lipschitz_g, gamma_next, sigma_uniform)
    D = residual_term + gamma * div + ell_mu ** p * div
    bound = inner_iteration_bound(p, lipschitz_g, gamma_next, sigma_uniform, delta, D)
    return max(int(math.ceil(caps.inner_slack * bound)), 8)


def _resolve_inner_solver(inner, caps):
    if inner == "tensor":
        return TensorInner(sub_cap=caps.subproblem)
    if inner == "exact":
        return ExactQuadraticInner()
    if callable(inner):
        return inner
    raise ValueError(f"unknown inner solver {inner!r}")


def contracting_step(state: OuterState, obj: CompositeObjective, prox: ProxFunction,
                     a_next, delta, inner, caps=None):
    """One outer iteration: inexact prox step on the contracted objective.

    ``inner`` is the inner-solver handle: ``inner(subproblem, z0, delta, cap)``
    returning an :class:`InnerResult`, or one of the shortcuts "tensor" and
    "exact".  Returns the advanced state together with the inner result
    (certified subgradient, iteration count).
    """
    if a_next <= 0:
        raise ValueError("a_next must be positive")
    if delta <= 0:
        raise ValueError("delta must be positive")
    caps = caps or RunCaps()
    inner = _resolve_inner_solver(inner, caps)
    A_next = state.A + a_next
    p = prox.order
    smooth = ContractedSmooth(obj.smooth, a_next, A_next, state.x, state.A)
    composite = CompositePart(obj.simple, a_next, state.gamma, prox, state.v)
    lipschitz_g = smooth.lipschitz(p)
    gamma_next = state.gamma + a_next * obj.simple.modulus
    sub = Subproblem(p=p, metric=obj.metric, smooth=smooth, composite=composite,
                     M=p * lipschitz_g, lipschitz_g=lipschitz_g,
                     strong_modulus=gamma_next, prox=prox)
    cap = caps.inner if caps.inner is not None else caps.inner_floor
    result = inner(sub, state.v, delta, cap)
    x_next = contraction_point(a_next, state.A, result.point, state.x)
    new_state = OuterState(state.k + 1, A_next, gamma_next, x_next, result.point)
    return new_state, result


class TensorInner:
    """Default inner solver: iterated regularized model steps."""

    def __init__(self, sub_cap=20000):
        self.sub_cap = sub_cap

    def __call__(self, sub, z0, delta, cap):
        return inner_loop(sub, z0, delta, cap, sub_cap=self.sub_cap)


class ExactQuadraticInner:
    """Closed-form inner solver for order-1 quadratic subproblems."""

    def __call__(self, sub, z0, delta, cap):
        return exact_quadratic_inner(sub, z0, delta, cap)


def run_contracting_proximal(obj: CompositeObjective, prox: ProxFunction, schedule,
                             delta_schedule, eps=None, caps=None, *, gamma0=1.0,
                             x0=None, inner="tensor", bregman0_bound=None,
                             header_extra=None):
    """Full outer loop; returns a :class:`RunTrace` with one record per iteration.

    Termination: when ``eps`` is given and the instance knows its optimum, the
    run stops at a true residual of at most eps; without a known optimum the
    computable certificate (which needs ``bregman0_bound``, an upper bound on
    the initial divergence to the optimum) plays that role.  With ``eps=None``
    the run simply executes ``caps.outer`` iterations, which is the usual mode
    for certificate batteries.

    Raises :class:`SolverError` if an eps target is set and the outer cap is
    exhausted before reaching it.
    """
    caps = caps or RunCaps()
    obj = obj.fresh()
    p = prox.order
    if schedule.p != p:
        raise ValueError("schedule order does not match the prox order")
    if obj.simple.modulus > 0 and obj.simple.prox is not None:
        if obj.simple.prox.order != p:
            raise ValueError("psi's declared prox order does not match the run's order")
    if x0 is None:
        x0 = prox.center.copy()
    x0 = np.asarray(x0, dtype=float)
    if p >= 2 and not np.array_equal(x0, prox.center):
        raise ValueError("order >= 2 runs must start at the prox center")
    lipschitz = obj.smooth.lipschitz[p]
    omega = getattr(schedule, "omega", None)
    delta_fn = delta_schedule.resolve(
        {"p": p, "gamma0": gamma0, "lipschitz": lipschitz, "omega": omega})
    inner_solver = _resolve_inner_solver(inner, caps)

    sigma_simple = obj.simple.modulus
    sigma_uniform = prox.uniform_constant
    fstar = obj.fstar
    xstar = obj.xstar

    header = {
        "method": f"cptm-p{p}", "p": p, "gamma0": gamma0, "lipschitz": lipschitz,
        "sigma_simple": sigma_simple, "sigma_uniform": sigma_uniform,
        "schedule": schedule.describe(), "delta_schedule": delta_schedule.describe(),
        "eps": eps, "x0": x0.tolist(), "instance": dict(obj.descriptor),
        "fstar": fstar,
    }
    if header_extra:
        header.update(header_extra)
    trace = RunTrace(header)

    state = OuterState(0, 0.0, gamma0, x0.copy(), x0.copy())
    f0 = obj.value(x0)
    residual = f0 - fstar if fstar is not None else math.nan
    trace.append(IterationRecord(
        k=0, A=0.0, gamma=gamma0, a=0.0, f_value=f0, residual=residual,
        delta_requested=math.nan, s_norm=math.nan, t_inner=0,
        counters=obj.counters.as_dict(),
        bregman_vstar=(prox.divergence(x0, xstar) if xstar is not None else math.nan),
        x=x0.copy(), v=x0.copy()))

    achieved = []
    A_seq = []
    while state.k < caps.outer:
        if eps is not None and fstar is not None and residual <= eps:
            trace.status = "converged"
            return trace
        if (eps is not None and fstar is None and bregman0_bound is not None
                and state.k >= 1):
            bound = inexact_certificate_bound(
                p, gamma0, sigma_simple, bregman0_bound, sigma_uniform,
                achieved, A_seq)
            if bound / state.A <= eps:
                trace.status = "converged"
                return trace

        a_next = schedule.next_a(state.k, state.A)
        A_next = state.A + a_next
        delta = delta_fn(state.k + 1)
        smooth = ContractedSmooth(obj.smooth, a_next, A_next, state.x, state.A)
        composite = CompositePart(obj.simple, a_next, state.gamma, prox, state.v)
        lipschitz_g = smooth.lipschitz(p)
        gamma_next = state.gamma + a_next * sigma_simple
        sub = Subproblem(p=p, metric=obj.metric, smooth=smooth, composite=composite,
                         M=p * lipschitz_g, lipschitz_g=lipschitz_g,
                         strong_modulus=gamma_next, prox=prox)
        residual_term = state.A * residual if fstar is not None else math.nan
        cap = _resolve_inner_cap(caps, p, lipschitz_g, state.gamma, gamma_next,
                                 sigma_uniform, delta, prox, state.v,
                                 residual_term, xstar)
        result: InnerResult = inner_solver(sub, state.v, delta, cap)
        v_next = result.point
        x_next = contraction_point(a_next, state.A, v_next, state.x)
        f_next = obj.value(x_next)
        residual = f_next - fstar if fstar is not None else math.nan
        achieved.append(result.s_norm)
        A_seq.append(A_next)
        trace.append(IterationRecord(
            k=state.k + 1, A=A_next, gamma=gamma_next, a=a_next, f_value=f_next,
            residual=residual, delta_requested=delta, s_norm=result.s_norm,
            t_inner=result.iterations, counters=obj.counters.as_dict(),
            bregman_step=prox.divergence(state.v, v_next),
            bregman_vstar=(prox.divergence(v_next, xstar)
                           if xstar is not None else math.nan),
            x=x_next, v=v_next, inner_steps=result.steps,
            lipschitz_g=lipschitz_g, M=p * lipschitz_g,
            ell_mu=inner_condition_ratio(p, lipschitz_g, gamma_next, sigma_uniform)))
        state = OuterState(state.k + 1, A_next, gamma_next, x_next, v_next)

    if eps is not None:
        if fstar is not None and residual <= eps:
            trace.status = "converged"
            return trace
        trace.status = "cap"
        raise SolverError(
            f"outer cap {caps.outer} exhausted at residual {residual:.3e} (target {eps:.3e})")
    trace.status = "cap"
    return trace
