"""Comparison models: GBM and GARCH(1,1) with Gaussian or Student-t innovations."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal, special

from ._validation import check_rng, check_series
from .metrics import DegenerateSeriesError

INNOVATIONS = ("gaussian", "student_t")


class GarchFitError(RuntimeError):
    """Optimizer gave up; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class GbmParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    mean_return: float = 0.0
    innovation: str = "gaussian"
    nu: float | None = None

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if not self.alpha + self.beta < 1:
            raise ValueError("alpha + beta must be < 1")
        if self.innovation not in INNOVATIONS:
            raise ValueError(f"innovation must be one of {INNOVATIONS}")
        if self.innovation == "student_t" and not (self.nu is not None and self.nu > 2):
            raise ValueError("student_t innovations need nu > 2")

    @property
    def unconditional_variance(self):
        return self.omega / (1.0 - self.alpha - self.beta)

    def to_dict(self):
        return {"omega": self.omega, "alpha": self.alpha, "beta": self.beta,
                "mean_return": self.mean_return, "innovation": self.innovation, "nu": self.nu}


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    loglik: float
    n_iter: int


def fit_gbm(series):
    """Constant drift and volatility: sample mean and unbiased standard deviation."""
    x = check_series(series)
    if np.all(x == x[0]):
        raise DegenerateSeriesError("degenerate series: zero variance")
    return GbmParams(float(x.mean()), float(x.std(ddof=1)))


def simulate_gbm(p, T, rng=None):
    """Daily simple returns ``mu + sigma * z``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    z = check_rng(rng).standard_normal(T)
    return p.mu + p.sigma * z


def garch_variance(eps, omega, alpha, beta, sigma2_0):
    """Conditional variances ``s[t] = omega + alpha * eps[t-1]**2 + beta * s[t-1]``."""
    eps = np.asarray(eps, dtype=float)
    out = np.empty(eps.size)
    out[0] = sigma2_0
    if eps.size > 1:
        drive = omega + alpha * eps[:-1] ** 2
        out[1:], _ = signal.lfilter([1.0], [1.0, -beta], drive, zi=[beta * sigma2_0])
    return out


def garch_loglik(series, p, sigma2_0=None):
    """Log-likelihood of ``series`` under ``p``, variance started at ``sigma2_0``
    (the unconditional variance of ``p`` by default)."""
    x = np.asarray(series, dtype=float)
    s0 = p.unconditional_variance if sigma2_0 is None else sigma2_0
    eps = x - p.mean_return
    s2 = garch_variance(eps, p.omega, p.alpha, p.beta, s0)
    return _loglik(eps, s2, p.innovation, p.nu)


def _loglik(eps, s2, innovation, nu):
    if innovation == "gaussian":
        return float(-0.5 * np.sum(math.log(2 * math.pi) + np.log(s2) + eps**2 / s2))
    n = eps.size
    const = (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
             - 0.5 * math.log(math.pi * (nu - 2)))
    return float(n * const - 0.5 * np.sum(np.log(s2))
                 - (nu + 1) / 2 * np.sum(np.log1p(eps**2 / (s2 * (nu - 2)))))


def _unpack(theta, innovation):
    mean, log_omega, a, b = (float(v) for v in theta[:4])
    m = max(a, b, 0.0)
    ea, eb, e0 = math.exp(a - m), math.exp(b - m), math.exp(-m)
    denom = e0 + ea + eb
    nu = 2.0 + math.exp(theta[4]) if innovation == "student_t" else None
    return mean, math.exp(log_omega), ea / denom, eb / denom, nu


def _pack(mean, omega, alpha, beta, nu, innovation):
    rest = 1.0 - alpha - beta
    theta = [mean, math.log(omega), math.log(alpha / rest), math.log(beta / rest)]
    if innovation == "student_t":
        theta.append(math.log(nu - 2.0))
    return np.array(theta)


def _central_grad(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fit_garch11(series, innovation="gaussian", max_iter=500, tol=1e-8):
    """Maximum-likelihood GARCH(1,1) with a constant mean.

    Optimizes over unconstrained coordinates (log omega, a logistic simplex
    for alpha and beta so that alpha + beta < 1, log(nu - 2)) with BFGS and
    central-difference gradients. Converged once the log-likelihood improves
    by less than ``tol`` over an iteration.

    The recursion starts at the candidate's unconditional variance. Starting
    at the sample variance instead leaves i.i.d. data without a unique
    optimum: beta -> 1 with omega -> 0 freezes the variance at its start.
    """
    if innovation not in INNOVATIONS:
        raise ValueError(f"innovation must be one of {INNOVATIONS}")
    x = check_series(series, min_len=3)
    if x.size < 100:
        warnings.warn(f"GARCH fit on only {x.size} observations", RuntimeWarning, stacklevel=2)
    scale = float(x.std(ddof=1))
    if not scale > 0:
        raise DegenerateSeriesError("degenerate series: zero variance")
    z = x / scale
    s0 = float(np.var(z, ddof=1))
    log_scale = z.size * math.log(scale)

    def negll(theta):
        mean, omega, alpha, beta, nu = _unpack(theta, innovation)
        eps = z - mean
        s2 = garch_variance(eps, omega, alpha, beta, omega / (1.0 - alpha - beta))
        if not np.all(s2 > 0):
            return np.inf
        return -_loglik(eps, s2, innovation, nu)

    theta0 = _pack(float(z.mean()), 0.1 * s0, 0.05, 0.90, 8.0, innovation)
    state = {"best": theta0.copy(), "f": negll(theta0), "n": 0, "converged": False}

    def callback(intermediate_result):
        state["n"] += 1
        f = intermediate_result.fun
        improvement = state["f"] - f
        if f < state["f"]:
            state["best"], state["f"] = intermediate_result.x.copy(), f
        if 0 <= improvement < tol:
            state["converged"] = True
            raise StopIteration

    res = optimize.minimize(negll, theta0, method="BFGS",
                            jac=lambda th: _central_grad(negll, th),
                            callback=callback,
                            options={"maxiter": max_iter, "gtol": 1e-10})
    if res.fun < state["f"]:
        state["best"], state["f"] = res.x.copy(), res.fun
    # status 2: the line search cannot improve the objective any further.
    if not (state["converged"] or res.status in (0, 2)):
        mean, omega, alpha, beta, nu = _unpack(state["best"], innovation)
        best = GarchParams(omega * scale**2, alpha, beta, float(mean * scale), innovation, nu)
        raise GarchFitError(f"GARCH fit did not converge in {max_iter} iterations: {res.message}",
                            best=best)

    mean, omega, alpha, beta, nu = _unpack(state["best"], innovation)
    params = GarchParams(omega * scale**2, alpha, beta, float(mean * scale), innovation, nu)
    return GarchFit(params, float(-state["f"] - log_scale), state["n"])


def simulate_garch11(p, T, rng=None):
    """Simulate ``T`` returns, variance started at its unconditional level.

    Student-t shocks are rescaled to unit variance so omega keeps its meaning.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = check_rng(rng)
    if p.innovation == "gaussian":
        z = rng.standard_normal(T)
    else:
        z = rng.standard_t(p.nu, T) * math.sqrt((p.nu - 2.0) / p.nu)
    out = np.empty(T)
    s2 = p.unconditional_variance
    omega, alpha, beta, mean = p.omega, p.alpha, p.beta, p.mean_return
    for t, zt in enumerate(z.tolist()):
        eps = math.sqrt(s2) * zt
        out[t] = mean + eps
        s2 = omega + alpha * eps * eps + beta * s2
    return out
