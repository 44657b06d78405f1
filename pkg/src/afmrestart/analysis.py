"""Spectral analysis of constant-coefficient AFM on strongly convex quadratics.

All quantities use the normalization L = 1: step sizes are in units of 1/L
and eigenvalues are divided by the largest one on entry.  With constant
coefficients (alpha, beta, gamma) the pair (x_k, x_{k-1}) evolves linearly, and
each eigenvalue lambda of Q contributes a 2x2 block whose characteristic
polynomial is

    r^2 - ((1 + beta)(1 - alpha*lambda) - gamma*alpha*lambda) r + beta(1 - alpha*lambda).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NotUnderdampedError",
    "QuadSystem",
    "ModeTrace",
    "discriminant",
    "char_roots",
    "rho_T_lambda",
    "rho_T",
    "system_matrix",
    "beta_star_of_gamma",
    "ogm_q_coeffs",
    "beta_i_star",
    "repeated_root",
    "regime",
    "psi",
    "simulate_modes",
    "mode_observables",
    "tuned_rates",
    "rho_curve",
    "REGIME_TOL",
]

REGIME_TOL = 1e-9


class NotUnderdampedError(ValueError):
    """Raised when an oscillation frequency is requested for a mode that does not oscillate."""


def _poly_coeffs(alpha, beta, gamma, lam):
    s = (1.0 + beta) * (1.0 - alpha * lam) - gamma * alpha * lam
    p = beta * (1.0 - alpha * lam)
    return s, p


def discriminant(alpha, beta, gamma, lam):
    s, p = _poly_coeffs(alpha, beta, gamma, lam)
    return s * s - 4.0 * p


_EPS = float(np.finfo(float).eps)


def _delta(s, p, size):
    # forward-error bound of s^2 - 4p given |terms forming s| <= size;
    # anything inside it is treated as a repeated root
    delta = s * s - 4.0 * p
    if abs(delta) <= 8.0 * _EPS * (abs(s) * size + abs(p)):
        return 0.0
    return delta


def _term_size(alpha, beta, gamma, lam):
    al = abs(alpha * lam)
    return (1.0 + abs(beta)) * (1.0 + al) + abs(gamma) * al


def char_roots(alpha, beta, gamma, lam):
    """Roots (r1, r2) of the characteristic polynomial, ordered |r1| >= |r2|."""
    s, p = _poly_coeffs(alpha, beta, gamma, lam)
    delta = _delta(s, p, _term_size(alpha, beta, gamma, lam))
    if delta >= 0.0:
        # cancellation-free form for the smaller root
        sq = math.sqrt(delta)
        r1 = 0.5 * (s + math.copysign(sq, s)) if s != 0.0 else 0.5 * sq
        r2 = p / r1 if r1 != 0.0 else 0.5 * (s - sq)
        r1, r2 = complex(r1), complex(r2)
    else:
        sq = cmath.sqrt(delta)
        r1 = 0.5 * (s + sq)
        r2 = 0.5 * (s - sq)
    if abs(r2) > abs(r1):
        r1, r2 = r2, r1
    return r1, r2


def rho_T_lambda(alpha, beta, gamma, lam):
    """Spectral radius of the 2x2 block for eigenvalue ``lam``."""
    s, p = _poly_coeffs(alpha, beta, gamma, lam)
    delta = _delta(s, p, _term_size(alpha, beta, gamma, lam))
    if delta < 0.0:
        return math.sqrt(p)
    return 0.5 * (abs(s) + math.sqrt(delta))


@dataclass(frozen=True)
class QuadSystem:
    """Constant-coefficient AFM applied to a quadratic with the given spectrum.

    ``lambdas`` may be given on any scale; they are normalized so the largest is 1.
    When omitted, the two-point spectrum {q, 1} is used.
    """

    q: float
    alpha: float
    beta: float
    gamma: float
    lambdas: tuple = None

    def __post_init__(self):
        if self.lambdas is None:
            lam = (self.q, 1.0) if self.q < 1.0 else (1.0,)
        else:
            arr = np.sort(np.asarray(self.lambdas, dtype=float))
            lam = tuple(arr / arr[-1])
        object.__setattr__(self, "lambdas", lam)
        if self.gamma < -1.0:
            raise ValueError("gamma must be >= -1")

    @property
    def ratios(self):
        return np.asarray(self.lambdas)


def rho_T(sys):
    """Spectral radius of the full iteration matrix.

    The per-eigenvalue radius is quasi-convex in lambda, so its maximum over
    [mu, L] sits at an endpoint.
    """
    lo = sys.lambdas[0]
    return max(
        rho_T_lambda(sys.alpha, sys.beta, sys.gamma, lo),
        rho_T_lambda(sys.alpha, sys.beta, sys.gamma, 1.0),
    )


def system_matrix(Q, alpha, beta, gamma):
    """The 2d x 2d matrix T mapping (x_k - x*, x_{k-1} - x*) to the next pair.

    ``alpha`` here is an absolute step size (not scaled by L).
    """
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[0]
    eye = np.eye(d)
    M = eye - alpha * Q
    top = np.hstack([(1.0 + beta) * M - gamma * alpha * Q, -beta * M])
    bottom = np.hstack([eye, np.zeros((d, d))])
    return np.vstack([top, bottom])


def beta_star_of_gamma(q, gamma):
    """Momentum making the lambda = mu block critically damped for the given gamma."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1); the q -> 1 limit is 0")
    if gamma < -1.0:
        raise ValueError("gamma must be >= -1")
    return (1.0 - math.sqrt(q * (1.0 + gamma))) ** 2 / (1.0 - q)


def ogm_q_coeffs(q):
    """(beta*, gamma*, rho*) minimizing the spectral radius with alpha = 1/L."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    gamma = 0.5 * (2.0 + q - math.sqrt(q * q + 8.0 * q))
    if q == 1.0:
        return 0.0, 0.0, 0.0
    beta = gamma * gamma / (1.0 - q)
    return beta, gamma, gamma


def beta_i_star(q_i, gamma):
    """Critical-damping momentum for the mode with eigenvalue ratio ``q_i`` = lambda_i/L."""
    if q_i >= 1.0:
        raise ValueError("the mode lambda_i = L is always in the low momentum regime")
    if q_i <= 0.0:
        raise ValueError("lambda_i must be positive")
    return (1.0 - math.sqrt((1.0 + gamma) * q_i)) ** 2 / (1.0 - q_i)


def repeated_root(q_i, gamma):
    return 1.0 - math.sqrt((1.0 + gamma) * q_i)


def regime(beta, gamma, q_i, tol=REGIME_TOL):
    """'low', 'optimal' or 'high' momentum for the mode with ratio ``q_i``."""
    if q_i >= 1.0:
        return "low"
    b = beta_i_star(q_i, gamma)
    if abs(beta - b) <= tol:
        return "optimal"
    return "low" if beta < b else "high"


def psi(beta, gamma, lambda_ratio, slack=1e-12):
    """Oscillation frequency (radians per iteration) of an under-damped mode."""
    m = 1.0 - lambda_ratio
    if beta * m <= 0.0:
        raise NotUnderdampedError("mode has no oscillatory component")
    arg = ((1.0 + beta) * m - gamma * lambda_ratio) / (2.0 * math.sqrt(beta * m))
    if abs(arg) > 1.0 + slack:
        raise NotUnderdampedError(f"arccos argument {arg:.17g} outside [-1, 1]")
    return math.acos(min(1.0, max(-1.0, arg)))


@dataclass
class ModeTrace:
    """Mode coefficients w (primary, y) and v (secondary, x); rows are iterations."""

    w: np.ndarray
    v: np.ndarray
    regimes: list
    lambdas: np.ndarray


def simulate_modes(sys, w0, iters):
    """Evolve every eigen-mode by its scalar second-order recurrence.

    Starts from x_0 = y_0 with mode coefficients ``w0`` (and x* = 0).
    """
    lam = sys.ratios
    w0 = np.asarray(w0, dtype=float)
    if w0.shape != lam.shape:
        raise ValueError("w0 must have one entry per mode")
    a, b, g = sys.alpha, sys.beta, sys.gamma
    m = 1.0 - a * lam
    s = (1.0 + b) * m - g * a * lam
    p = b * m
    w = np.empty((iters + 1, lam.size))
    v = np.empty((iters + 1, lam.size))
    w[0] = w0
    v[0] = w0
    if iters >= 1:
        w[1] = m * w0
        v[1] = ((1.0 + b + g) * m - (b + g)) * w0
    for k in range(iters - 1):
        w[k + 2] = s * w[k + 1] - p * w[k]
        v[k + 2] = s * v[k + 1] - p * v[k]
    regimes = [regime(b, g, float(li)) for li in lam]
    return ModeTrace(w, v, regimes, lam)


def mode_observables(trace):
    """Restart-relevant quantities expressed through the mode coefficients.

    Returns a dict of arrays: ``f_y`` and ``f_x`` (objective gaps of y_k and x_k),
    ``gr`` = <-grad f(x_k), y_{k+1} - y_k> and ``gd`` = <grad f(x_k), grad f(x_{k-1})>,
    for L = 1.  ``gr`` has one fewer row than ``f_y``; ``gd[k]`` pairs rows k and k-1.
    """
    lam = trace.lambdas
    w, v = trace.w, trace.v
    return {
        "f_y": 0.5 * (w * w) @ lam,
        "f_x": 0.5 * (v * v) @ lam,
        "gr": -((v[:-1] * (w[1:] - w[:-1])) @ lam),
        "gd": (v[1:] * v[:-1]) @ (lam * lam),
    }


def tuned_rates(q):
    """Rows (method, alpha*L, beta, gamma, rho) of the tuned constant-coefficient methods."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    sq = math.sqrt(q)
    b_ogm, g_ogm, r_ogm = ogm_q_coeffs(q)
    s3 = math.sqrt(3.0 + q)
    rows = [
        ("GM-q", 2.0 / (1.0 + q), 0.0, 0.0, (1.0 - q) / (1.0 + q)),
        ("FGM-q", 1.0, (1.0 - sq) / (1.0 + sq), 0.0, 1.0 - sq),
        ("FGM'-q", 4.0 / (q + 3.0), (s3 - 2.0 * sq) / (s3 + 2.0 * sq), 0.0, 1.0 - 2.0 * sq / s3),
        ("OGM-q", 1.0, b_ogm, g_ogm, r_ogm),
    ]
    return sorted(rows, key=lambda r: r[4])


def rho_curve(q, beta, gamma, n_lambda=200, alpha=1.0):
    """Rows (lambda, |r1|, |r2|, rho) over an evenly spaced grid of [q, 1]."""
    if n_lambda < 2:
        raise ValueError("n_lambda must be at least 2")
    rows = []
    for lam in np.linspace(q, 1.0, n_lambda):
        r1, r2 = char_roots(alpha, beta, gamma, lam)
        rows.append((float(lam), abs(r1), abs(r2), rho_T_lambda(alpha, beta, gamma, lam)))
    return rows
