"""Composite objectives F = f + psi with counted oracle access.

Two experiment families ship: a quadratic with a sigmoid-shaped spectrum whose
condition ratio is set exactly, and a log-sum-exp objective measured in the
norm induced by B = sum_i a_i a_i^T.  Both are generated deterministically
from a seed and carry a JSON-serializable descriptor so any run can be rebuilt
bit-for-bit.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.special

from .bregman import ProxFunction
from .metric import Metric


class SolverError(RuntimeError):
    """A solver failed to reach its target within its iteration budget."""


@dataclass
class OracleCounters:
    value: int = 0
    grad: int = 0
    hess: int = 0
    matvec: int = 0

    def copy(self):
        return OracleCounters(self.value, self.grad, self.hess, self.matvec)

    def as_dict(self):
        return {"oracle_f": self.value, "oracle_g": self.grad,
                "oracle_h": self.hess, "matvec": self.matvec}


class SmoothOracle:
    """Counted access to f, grad f and (optionally) hess f.

    ``lipschitz[p]`` is the Lipschitz estimate of the p-th derivative in the
    instance's norm.  ``taylor_data(x, order)`` returns everything a model of
    that order needs in one call, so a point queried once is charged once.
    """

    dim: int
    order_max: int
    lipschitz: dict

    def __init__(self):
        self.counters = OracleCounters()

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def value_and_grad(self, x):
        return self.value(x), self.grad(x)

    def hess(self, x):
        raise NotImplementedError

    def taylor_data(self, x, order):
        v, g = self.value_and_grad(x)
        H = self.hess(x) if order >= 2 else None
        return v, g, H


class QuadraticOracle(SmoothOracle):
    """f(x) = 1/2 <Ax, x> - <b, x>; every application of A bumps the matvec counter."""

    def __init__(self, A, b, lam_max=None):
        super().__init__()
        self.matrix = np.asarray(A, dtype=float)
        self.rhs = np.asarray(b, dtype=float)
        self.dim = self.rhs.shape[0]
        self.order_max = 2
        if lam_max is None:
            lam_max = float(np.linalg.eigvalsh(self.matrix).max())
        # the quadratic has an exactly constant Hessian, so order 2 is free
        self.lipschitz = {1: lam_max, 2: 0.0}

    def _ax(self, x):
        self.counters.matvec += 1
        return self.matrix @ x

    def value(self, x):
        self.counters.value += 1
        ax = self._ax(x)
        return 0.5 * float(x @ ax) - float(self.rhs @ x)

    def grad(self, x):
        self.counters.grad += 1
        return self._ax(x) - self.rhs

    def value_and_grad(self, x):
        self.counters.value += 1
        self.counters.grad += 1
        ax = self._ax(x)
        return 0.5 * float(x @ ax) - float(self.rhs @ x), ax - self.rhs

    def hess(self, x):
        self.counters.hess += 1
        return self.matrix


class LogSumExpOracle(SmoothOracle):
    """f(x) = mu * log(sum_i exp((<a_i, x> - b_i)/mu)) with an analytic Hessian."""

    def __init__(self, A, b, mu, lipschitz_order2=1.0):
        super().__init__()
        if mu <= 0:
            raise ValueError("mu must be positive")
        self.data = np.asarray(A, dtype=float)
        self.shift = np.asarray(b, dtype=float)
        self.mu = float(mu)
        self.dim = self.data.shape[1]
        self.order_max = 2
        # 1/mu bounds the Hessian in the B = A^T A norm; L_2 is configurable
        # (2/mu^2 is a certified bound, 1.0 mirrors the practical setting)
        self.lipschitz = {1: 1.0 / self.mu, 2: float(lipschitz_order2)}

    def _weights(self, x):
        u = (self.data @ x - self.shift) / self.mu
        umax = u.max()
        w = np.exp(u - umax)
        s = w.sum()
        return umax, w / s, s

    def value(self, x):
        self.counters.value += 1
        umax, _, s = self._weights(x)
        return self.mu * (umax + math.log(s))

    def grad(self, x):
        self.counters.grad += 1
        _, pi, _ = self._weights(x)
        return self.data.T @ pi

    def value_and_grad(self, x):
        self.counters.value += 1
        self.counters.grad += 1
        umax, pi, s = self._weights(x)
        return self.mu * (umax + math.log(s)), self.data.T @ pi

    def hess(self, x):
        self.counters.hess += 1
        _, pi, _ = self._weights(x)
        g = self.data.T @ pi
        H = (self.data.T * pi) @ self.data - np.outer(g, g)
        return H / self.mu

    def taylor_data(self, x, order):
        umax, pi, s = self._weights(x)
        self.counters.value += 1
        self.counters.grad += 1
        v = self.mu * (umax + math.log(s))
        g = self.data.T @ pi
        H = None
        if order >= 2:
            self.counters.hess += 1
            H = ((self.data.T * pi) @ self.data - np.outer(g, g)) / self.mu
        return v, g, H


class SimpleComponent:
    """The simple part psi of F = f + psi, with a declared strong-convexity modulus.

    ``modulus`` is relative to ``prox`` (zero means plain convexity).
    """

    modulus: float = 0.0
    prox: ProxFunction | None = None

    def value(self, x):
        raise NotImplementedError

    def subgrad(self, x):
        raise NotImplementedError

    def hess(self, x):
        """Hessian when psi is smooth; used only by reference solvers."""
        raise NotImplementedError

    @property
    def is_zero(self):
        return False


class ZeroComponent(SimpleComponent):
    def __init__(self, dim):
        self.dim = dim

    def value(self, x):
        return 0.0

    def subgrad(self, x):
        return np.zeros(self.dim)

    def hess(self, x):
        return np.zeros((self.dim, self.dim))

    @property
    def is_zero(self):
        return True


class PowerRegularizer(SimpleComponent):
    """psi = sigma * d for a prox function d; certified modulus sigma.

    Scaling a prox by sigma scales its divergence by sigma, so the
    strong-convexity inequality relative to d holds with equality.
    """

    def __init__(self, sigma, prox):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.prox = prox
        self.modulus = self.sigma

    def value(self, x):
        return self.sigma * self.prox.value(x)

    def subgrad(self, x):
        return self.sigma * self.prox.gradient(x)

    def hess(self, x):
        p = self.prox
        u = np.asarray(x, float) - p.center
        B = p.metric.matrix
        if p.order == 1:
            return self.sigma * B
        r = p.metric.norm(u)
        if r == 0.0:
            return np.zeros_like(B)
        Bu = B @ u
        return self.sigma * (r ** (p.order - 1) * B
                             + (p.order - 1) * r ** (p.order - 3) * np.outer(Bu, Bu))


def power_regularizer_component(sigma, prox):
    """Simple component psi = sigma*d with its certified modulus attached."""
    return PowerRegularizer(sigma, prox)


@dataclass
class CompositeObjective:
    """Oracle bundle for F = f + psi plus the geometry the solvers use."""

    smooth: SmoothOracle
    simple: SimpleComponent
    metric: Metric
    fstar: float | None = None
    xstar: np.ndarray | None = None
    descriptor: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.smooth.dim

    @property
    def counters(self):
        return self.smooth.counters

    def value(self, x):
        return self.smooth.value(x) + self.simple.value(x)

    def grad(self, x):
        return self.smooth.grad(x) + self.simple.subgrad(x)

    def fresh(self):
        """Shallow copy with zeroed counters; data arrays stay shared."""
        smooth = copy.copy(self.smooth)
        smooth.counters = OracleCounters()
        return CompositeObjective(smooth, self.simple, self.metric,
                                  self.fstar, self.xstar, dict(self.descriptor))

    def with_simple(self, simple, fstar=None, xstar=None):
        desc = dict(self.descriptor)
        obj = CompositeObjective(self.smooth, simple, self.metric, fstar, xstar, desc)
        return obj.fresh()


def sigmoid_spectrum(n, alpha):
    """Eigenvalues 1/(1 + exp(alpha*(n+1-2i)/(n-1))), i = 1..n (increasing)."""
    if n < 2:
        raise ValueError("n must be >= 2 (the spectrum formula divides by n-1)")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    i = np.arange(1, n + 1)
    return 1.0 / (1.0 + np.exp(alpha * (n + 1 - 2 * i) / (n - 1)))


def alpha_for_condition_ratio(q):
    """Solve lambda_min/lambda_max = q for the spectrum's steepness alpha."""
    if not 0.0 < q < 1.0:
        raise ValueError("condition ratio must lie in (0, 1)")

    def ratio_gap(alpha):
        return (1.0 + math.exp(-alpha)) / (1.0 + math.exp(alpha)) - q

    return float(scipy.optimize.brentq(ratio_gap, 1e-12, 80.0, xtol=1e-15, rtol=8.9e-16))


def quadratic_instance(n, alpha, seed):
    """Quadratic test problem with sigmoid spectrum and a random orthogonal basis.

    f(x) = 1/2 <Ax,x> - <b,x> with A = Q diag(lam) Q^T, psi = 0, B = I, and the
    closed-form optimum attached.  Q comes from a QR factorization of a seeded
    Gaussian matrix.  The right-hand side plants a seeded uniform solution
    (b = A x*), which keeps the energy of the slow eigenmodes bounded; drawing
    b directly would concentrate nearly all of the initial residual on the
    smallest eigenvalues and erase the methods' characteristic orderings.
    """
    lam = sigmoid_spectrum(n, alpha)
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    A = (Q * lam) @ Q.T
    A = 0.5 * (A + A.T)
    xstar = rng.uniform(-1.0, 1.0, n)
    b = A @ xstar
    fstar = 0.5 * float(xstar @ (A @ xstar)) - float(b @ xstar)
    smooth = QuadraticOracle(A, b, lam_max=float(lam[-1]))
    descriptor = {
        "problem": "quadratic", "n": int(n), "alpha": float(alpha), "seed": int(seed),
        "lambda_min": float(lam[0]), "lambda_max": float(lam[-1]),
        "condition_ratio": float(lam[0] / lam[-1]), "fstar": fstar,
    }
    return CompositeObjective(smooth, ZeroComponent(n), Metric.identity(n),
                              fstar=fstar, xstar=xstar, descriptor=descriptor)


def lse_instance(n, mu, seed, lipschitz_order2=1.0):
    """Log-sum-exp test problem, m = 6n, coefficients seeded uniform on [-1, 1].

    The primal norm is taken from B = sum_i a_i a_i^T (regularized by 1e-10*I
    if rank-deficient), which puts the Hessian bound at 1/mu exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if mu <= 0:
        raise ValueError("mu must be positive")
    m = 6 * n
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, (m, n))
    b = rng.uniform(-1.0, 1.0, m)
    B = A.T @ A
    try:
        metric = Metric(B)
        regularized = False
    except ValueError:
        metric = Metric(B + 1e-10 * np.eye(n))
        regularized = True
    smooth = LogSumExpOracle(A, b, mu, lipschitz_order2=lipschitz_order2)
    descriptor = {
        "problem": "lse", "n": int(n), "m": int(m), "mu": float(mu), "seed": int(seed),
        "lipschitz_order2": float(lipschitz_order2), "metric_regularized": regularized,
    }
    return CompositeObjective(smooth, ZeroComponent(n), metric, descriptor=descriptor)


def _newton_reference(obj, tol, cap=200):
    """Damped Newton on F down to dual gradient norm <= tol (second-order oracles)."""
    x = np.zeros(obj.dim)
    fval = obj.value(x)
    for _ in range(cap):
        g = obj.grad(x)
        if obj.metric.dual_norm(g) <= tol:
            return x, fval
        H = obj.smooth.hess(x) + obj.simple.hess(x)
        try:
            step = -scipy.linalg.solve(H, g, assume_a="pos")
        except np.linalg.LinAlgError:
            reg = 1e-12 * (1.0 + float(np.trace(H)) / obj.dim)
            step = -scipy.linalg.solve(H + reg * np.eye(obj.dim), g, assume_a="pos")
        t = 1.0
        slope = float(g @ step)
        for _ in range(60):
            trial = obj.value(x + t * step)
            if trial <= fval + 1e-4 * t * slope:
                break
            t *= 0.5
        x = x + t * step
        fval = trial
    raise SolverError(f"reference Newton did not reach tol={tol} within {cap} iterations")


def reference_optimum(obj, tol):
    """Most accurate available solve of the instance: (xhat, F(xhat)).

    Quadratic-with-quadratic-psi instances use a closed-form linear solve;
    everything else runs a damped Newton until the dual gradient norm is
    below tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    smooth = obj.smooth
    simple = obj.simple
    if isinstance(smooth, QuadraticOracle):
        if simple.is_zero:
            x = np.linalg.solve(smooth.matrix, smooth.rhs)
            return x, 0.5 * float(x @ smooth.matrix @ x) - float(smooth.rhs @ x)
        if isinstance(simple, PowerRegularizer) and simple.prox.order == 1:
            B = simple.prox.metric.matrix
            c = simple.prox.center
            H = smooth.matrix + simple.sigma * B
            x = np.linalg.solve(H, smooth.rhs + simple.sigma * (B @ c))
            fx = 0.5 * float(x @ smooth.matrix @ x) - float(smooth.rhs @ x)
            return x, fx + simple.value(x)
    work = obj.fresh()
    return _newton_reference(work, tol)


def attach_reference(obj, tol=1e-12):
    """Compute and cache (xstar, fstar) on the instance and its descriptor."""
    if obj.fstar is None or obj.xstar is None:
        x, f = reference_optimum(obj, tol)
        obj.xstar = x
        obj.fstar = f
        obj.descriptor["fstar"] = f
    return obj
