"""Reference first- and second-order solvers for the benchmark comparisons.

All baselines share the contracting solver's trace format and counter
semantics, so oracle columns remain comparable across methods.  Fields that
have no meaning for a given method (coefficients, inner accuracies) are NaN.
"""

from __future__ import annotations

import math

import numpy as np

from .objectives import CompositeObjective, SolverError
from .tensor_steps import (CompositePart, PlainSmooth, Subproblem, TaylorModel,
                           step_subgradient, tensor_step)
from .trace import IterationRecord, RunTrace


def _new_trace(obj, method, eps, cap, extra=None):
    header = {"method": method, "eps": eps, "cap": cap,
              "instance": dict(obj.descriptor), "fstar": obj.fstar}
    if extra:
        header.update(extra)
    return RunTrace(header)


def _record(trace, obj, k, f, residual, *, a=math.nan, A=math.nan, gamma=math.nan,
            delta=math.nan, s_norm=math.nan, t=0, x=None, v=None):
    trace.append(IterationRecord(
        k=k, A=A, gamma=gamma, a=a, f_value=f, residual=residual,
        delta_requested=delta, s_norm=s_norm, t_inner=t,
        counters=obj.counters.as_dict(), x=x, v=v))


def _residual(f, fstar):
    return f - fstar if fstar is not None else math.nan


def _done(residual, grad_norm, eps, fstar):
    if fstar is not None:
        return residual <= eps
    return grad_norm <= eps


def gradient_method_ls(obj: CompositeObjective, x0, eps, cap, l0=None):
    """Gradient descent with a doubling/halving local Lipschitz estimate.

    Monotone: a trial step is accepted only under the standard sufficient
    decrease f(x+) <= f(x) - ||grad||_*^2 / (2 L).  Every trial costs one
    value query (one matvec on a quadratic).
    """
    if not obj.simple.is_zero:
        raise ValueError("the first-order baselines run on smooth instances only")
    obj = obj.fresh()
    metric = obj.metric
    L_known = obj.smooth.lipschitz.get(1)
    L = float(l0) if l0 is not None else (L_known if L_known is not None else 1.0)
    # at the true constant the decrease holds mathematically, so a rejection
    # there is round-off; stop doubling and take that step unconditionally
    L_cap = L_known if L_known is not None else math.inf
    trace = _new_trace(obj, "gm", eps, cap, {"line_search": {"l0": L, "grow": 2.0, "shrink": 0.5}})
    x = np.asarray(x0, dtype=float).copy()
    f = obj.smooth.value(x)
    residual = _residual(f, obj.fstar)
    _record(trace, obj, 0, f, residual, x=x)
    for k in range(1, cap + 1):
        g = obj.smooth.grad(x)
        gn = metric.dual_norm(g)
        if _done(residual, gn, eps, obj.fstar):
            trace.status = "converged"
            return trace
        direction = metric.solve(g)
        L_try = max(0.5 * L, 1e-14)
        trials = 0
        while True:
            trials += 1
            if trials > 120:
                raise SolverError("gradient line search failed to find a decrease step")
            x_t = x - direction / L_try
            f_t = obj.smooth.value(x_t)
            if f_t <= f - gn * gn / (2.0 * L_try) + 1e-15 * max(abs(f), 1.0):
                break
            if L_try >= L_cap:
                break
            L_try = min(2.0 * L_try, L_cap)
        x, f, L = x_t, f_t, L_try
        residual = _residual(f, obj.fstar)
        _record(trace, obj, k, f, residual, s_norm=gn, t=trials, x=x)
    if _done(residual, metric.dual_norm(obj.smooth.grad(x)), eps, obj.fstar):
        trace.status = "converged"
        return trace
    trace.status = "cap"
    raise SolverError(f"gradient method exhausted {cap} iterations (residual {residual:.3e})")


def accelerated_gradient(obj: CompositeObjective, x0, eps, cap, L=None):
    """Estimating-sequence accelerated gradient with a_{k+1}^2 = (a_{k+1}+A_k)/L."""
    if not obj.simple.is_zero:
        raise ValueError("the first-order baselines run on smooth instances only")
    obj = obj.fresh()
    metric = obj.metric
    L = float(L) if L is not None else obj.smooth.lipschitz[1]
    trace = _new_trace(obj, "agm", eps, cap, {"L": L})
    x = np.asarray(x0, dtype=float).copy()
    v = x.copy()
    A = 0.0
    f = obj.smooth.value(x)
    residual = _residual(f, obj.fstar)
    _record(trace, obj, 0, f, residual, A=0.0, a=0.0, x=x, v=v)
    for k in range(1, cap + 1):
        if obj.fstar is not None and residual <= eps:
            trace.status = "converged"
            return trace
        a = (1.0 + math.sqrt(1.0 + 4.0 * L * A)) / (2.0 * L)
        A_next = A + a
        y = (a * v + A * x) / A_next
        g = obj.smooth.grad(y)
        step = metric.solve(g)
        x = y - step / L
        v = v - a * step
        A = A_next
        f = obj.smooth.value(x)
        residual = _residual(f, obj.fstar)
        _record(trace, obj, k, f, residual, a=a, A=A, s_norm=metric.dual_norm(g),
                t=1, x=x, v=v)
    if obj.fstar is not None and residual <= eps:
        trace.status = "converged"
        return trace
    trace.status = "cap"
    raise SolverError(f"accelerated gradient exhausted {cap} iterations (residual {residual:.3e})")


def classical_ppa(obj: CompositeObjective, x0, eps, cap, a_const=None,
                  inner_cap=20000):
    """Constant-coefficient proximal point: each step approximately minimizes
    a*f(z) + ||z - x_k||^2/2, solved by the line-search gradient method to the
    inner accuracy 1/k^2."""
    if not obj.simple.is_zero:
        raise ValueError("the first-order baselines run on smooth instances only")
    obj = obj.fresh()
    metric = obj.metric
    a = float(a_const) if a_const is not None else 1.0 / obj.smooth.lipschitz[1]
    trace = _new_trace(obj, "ppa", eps, cap, {"a": a})
    x = np.asarray(x0, dtype=float).copy()
    f = obj.smooth.value(x)
    residual = _residual(f, obj.fstar)
    _record(trace, obj, 0, f, residual, x=x)
    L_smooth = obj.smooth.lipschitz.get(1)
    L_cap = a * L_smooth + 1.0 if L_smooth is not None else math.inf
    L_loc = a * (L_smooth if L_smooth is not None else 1.0) + 1.0
    for k in range(1, cap + 1):
        if obj.fstar is not None and residual <= eps:
            trace.status = "converged"
            return trace
        delta_k = 1.0 / k ** 2
        z = x.copy()
        fz, gz = obj.smooth.value_and_grad(z)
        sub_grad = a * gz
        dn = metric.dual_norm(sub_grad)
        t = 0
        while dn > delta_k:
            t += 1
            if t > inner_cap:
                raise SolverError("proximal subproblem solve exceeded its inner cap")
            phi = a * fz + 0.5 * metric.norm(z - x) ** 2
            L_try = max(0.5 * L_loc, 1e-14)
            trials = 0
            while True:
                trials += 1
                if trials > 120:
                    raise SolverError("proximal inner line search failed")
                z_t = z - metric.solve(sub_grad) / L_try
                f_t = obj.smooth.value(z_t)
                phi_t = a * f_t + 0.5 * metric.norm(z_t - x) ** 2
                if phi_t <= phi - dn * dn / (2.0 * L_try) + 1e-15 * max(abs(phi), 1.0):
                    break
                if L_try >= L_cap:
                    break
                L_try = min(2.0 * L_try, L_cap)
            z, fz, L_loc = z_t, f_t, L_try
            gz = obj.smooth.grad(z)
            sub_grad = a * gz + metric.apply(z - x)
            dn = metric.dual_norm(sub_grad)
        x = z
        f = fz
        residual = _residual(f, obj.fstar)
        _record(trace, obj, k, f, residual, a=a, delta=delta_k, s_norm=dn, t=t, x=x)
    if obj.fstar is not None and residual <= eps:
        trace.status = "converged"
        return trace
    trace.status = "cap"
    raise SolverError(f"proximal point exhausted {cap} iterations (residual {residual:.3e})")


def cubic_newton(obj: CompositeObjective, x0, eps, cap, reg=1.0):
    """Cubic-regularized Newton: iterated order-2 regularized model steps on F.

    ``reg`` is the cubic coefficient M (practical default 1).  One
    second-order oracle query per iteration.
    """
    obj = obj.fresh()
    metric = obj.metric
    smooth = PlainSmooth(obj.smooth)
    composite = CompositePart(obj.simple, 1.0, 0.0, None, None)
    sub = Subproblem(p=2, metric=metric, smooth=smooth, composite=composite,
                     M=reg, lipschitz_g=obj.smooth.lipschitz.get(2, reg))
    trace = _new_trace(obj, "cn", eps, cap, {"reg": reg})
    z = np.asarray(x0, dtype=float).copy()
    data = smooth.data(z, 2)
    f = data.value + obj.simple.value(z)
    residual = _residual(f, obj.fstar)
    _record(trace, obj, 0, f, residual, x=z)
    for k in range(1, cap + 1):
        grad_norm = metric.dual_norm(data.grad + obj.simple.subgrad(z))
        if _done(residual, grad_norm, eps, obj.fstar):
            trace.status = "converged"
            return trace
        step = tensor_step(sub, data, inner_tol=max(eps * 1e-2, 1e-13))
        model = TaylorModel(data, 2)
        z_next = step.point
        data_next = smooth.data(z_next, 2)
        s = step_subgradient(sub, model, data_next.grad, z_next)
        z, data = z_next, data_next
        f = data.value + obj.simple.value(z)
        residual = _residual(f, obj.fstar)
        _record(trace, obj, k, f, residual,
                s_norm=metric.dual_norm(s) + step.sub_residual, t=1, x=z)
    grad_norm = metric.dual_norm(data.grad + obj.simple.subgrad(z))
    if _done(residual, grad_norm, eps, obj.fstar):
        trace.status = "converged"
        return trace
    trace.status = "cap"
    raise SolverError(f"cubic Newton exhausted {cap} iterations (residual {residual:.3e})")


def accelerated_cubic_newton(obj: CompositeObjective, x0, eps, cap, reg=1.0,
                             prox_reg=None, monotone=False):
    """Estimating-sequence acceleration of the cubic Newton step.

    Linear lower models are accumulated against a cubic prox term centered at
    the start; the auxiliary point has a closed form.  With ``monotone`` off
    the objective may oscillate; the certificate is the estimating-sequence
    bound, not per-step descent.  Two smooth-oracle queries per iteration
    (one second-order at the look-ahead point, one first-order at the new
    iterate).
    """
    if not obj.simple.is_zero:
        raise ValueError("the accelerated cubic baseline runs on smooth instances only")
    obj = obj.fresh()
    metric = obj.metric
    # the same fixed regularization constant works well for the prox term
    N = float(prox_reg) if prox_reg is not None else reg
    smooth = PlainSmooth(obj.smooth)
    composite = CompositePart(obj.simple, 1.0, 0.0, None, None)
    sub = Subproblem(p=2, metric=metric, smooth=smooth, composite=composite,
                     M=reg, lipschitz_g=obj.smooth.lipschitz.get(2, reg))
    trace = _new_trace(obj, "acn", eps, cap, {"reg": reg, "prox_reg": N,
                                              "monotone": monotone})
    x_anchor = np.asarray(x0, dtype=float).copy()
    x = x_anchor.copy()
    s_acc = np.zeros_like(x)
    A = 0.0
    f = obj.smooth.value(x)
    residual = _residual(f, obj.fstar)
    _record(trace, obj, 0, f, residual, A=0.0, a=0.0, x=x)
    for k in range(1, cap + 1):
        if obj.fstar is not None and residual <= eps:
            trace.status = "converged"
            return trace
        a = 0.5 * k * (k + 1)
        A_next = A + a
        sn = metric.dual_norm(s_acc)
        if sn == 0.0:
            v = x_anchor.copy()
        else:
            r = math.sqrt(2.0 * sn / N)
            v = x_anchor - (2.0 / (N * r)) * metric.solve(s_acc)
        y = (A * x + a * v) / A_next
        data_y = smooth.data(y, 2)
        step = tensor_step(sub, data_y, inner_tol=max(eps * 1e-2, 1e-13))
        x_next = step.point
        f_next, g_next = obj.smooth.value_and_grad(x_next)
        s_acc = s_acc + a * g_next
        if monotone and f_next > f:
            x_next, f_next = x, f
        x, f, A = x_next, f_next, A_next
        residual = _residual(f, obj.fstar)
        _record(trace, obj, k, f, residual, a=a, A=A,
                s_norm=metric.dual_norm(g_next), t=1, x=x, v=v)
    if obj.fstar is not None and residual <= eps:
        trace.status = "converged"
        return trace
    trace.status = "cap"
    raise SolverError(f"accelerated cubic Newton exhausted {cap} iterations "
                      f"(residual {residual:.3e})")
