"""Problem abstractions and the seeded test-problem families.

A smooth part exposes ``value``, ``gradient``, ``lipschitz`` and
``strong_convexity``; a proximable part exposes ``value`` and
``prox(z, zeta)``.  Every generator is a pure function of its arguments,
including the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SmoothOracle",
    "ProxOracle",
    "QuadraticProblem",
    "LeastSquares",
    "LogSumExp",
    "ZeroProx",
    "L1Norm",
    "BoxIndicator",
    "CompositeProblem",
    "lambda_max",
    "gen_quadratic",
    "fixed_quadratic_case2",
    "logsumexp_oracle",
    "gen_logsumexp",
    "soft_threshold",
    "box_projection",
    "gen_lasso",
    "gen_boxqp",
    "gradient_check",
    "lipschitz_check",
    "prox_check",
]

EXACT_EIG_MAX_DIM = 2000


class SmoothOracle:
    """Base class for a differentiable convex function with L-Lipschitz gradient."""

    dim: int
    lipschitz: float
    strong_convexity: float | None = None

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


class ProxOracle:
    """Base class for a proximable convex function (may take the value +inf)."""

    def value(self, x):
        raise NotImplementedError

    def prox(self, z, zeta):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


def lambda_max(M, tol=1e-10, max_iter=10000, seed=0):
    """Largest eigenvalue of the symmetric PSD matrix ``M``.

    Exact symmetric eigensolve up to ``EXACT_EIG_MAX_DIM``, power iteration above.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if n <= EXACT_EIG_MAX_DIM:
        return float(np.linalg.eigvalsh(M)[-1])
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            return lam_new
        lam = lam_new
    return lam


def _spectrum_matrix(V, lambdas):
    Q = (V * lambdas) @ V.T
    return 0.5 * (Q + Q.T)


# ---------------------------------------------------------------------------
# smooth parts


@dataclass(frozen=True, eq=False)
class QuadraticProblem(SmoothOracle):
    """f(x) = 1/2 x'Qx - p'x.

    ``eigenvalues`` and ``eigenvectors`` are kept from construction when
    available so that mu and L are exact rather than re-estimated.
    """

    Q: np.ndarray
    p: np.ndarray
    eigenvalues: np.ndarray = field(default=None)
    eigenvectors: np.ndarray = field(default=None)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or p.shape != (Q.shape[0],):
            raise ValueError("Q must be square and p must match its size")
        if self.eigenvalues is None:
            lam, V = np.linalg.eigh(Q)
        else:
            lam = np.asarray(self.eigenvalues, dtype=float)
            V = np.asarray(self.eigenvectors, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", V)

    @property
    def dim(self):
        return self.Q.shape[0]

    @property
    def lipschitz(self):
        return float(self.eigenvalues[-1])

    @property
    def strong_convexity(self):
        return float(max(self.eigenvalues[0], 0.0))

    @property
    def q(self):
        return self.strong_convexity / self.lipschitz

    @property
    def x_star(self):
        lam = self.eigenvalues
        if lam[0] <= 0.0:
            raise ValueError("Q is singular; the minimizer is not unique")
        V = self.eigenvectors
        return V @ ((V.T @ self.p) / lam)

    @property
    def f_star(self):
        return float(-0.5 * self.p @ self.x_star)

    def value(self, x):
        return float(0.5 * x @ (self.Q @ x) - self.p @ x)

    def gradient(self, x):
        return self.Q @ x - self.p


@dataclass(frozen=True, eq=False)
class LeastSquares(SmoothOracle):
    """f(x) = 1/2 ||Ax - b||^2."""

    A: np.ndarray
    b: np.ndarray
    lipschitz: float = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", lambda_max(A.T @ A))

    @property
    def dim(self):
        return self.A.shape[1]

    def value(self, x):
        r = self.A @ x - self.b
        return float(0.5 * r @ r)

    def gradient(self, x):
        return self.A.T @ (self.A @ x - self.b)


@dataclass(frozen=True, eq=False)
class LogSumExp(SmoothOracle):
    """f(x) = eta * log(sum_i exp((a_i'x - b_i) / eta))."""

    A: np.ndarray
    b: np.ndarray
    eta: float
    lipschitz: float = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        A = np.asarray(self.A, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", lambda_max(A.T @ A) / self.eta)

    @property
    def dim(self):
        return self.A.shape[1]

    def _scaled(self, x):
        return (self.A @ x - self.b) / self.eta

    def value(self, x):
        z = self._scaled(x)
        zmax = z.max()
        return float(self.eta * (zmax + np.log(np.exp(z - zmax).sum())))

    def gradient(self, x):
        z = self._scaled(x)
        s = np.exp(z - z.max())
        s /= s.sum()
        return self.A.T @ s


# ---------------------------------------------------------------------------
# proximable parts


def soft_threshold(z, t):
    """Elementwise sgn(z) * max(|z| - t, 0); the prox of t*||.||_1 at unit step."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def box_projection(z, lower, upper):
    """Clamp ``z`` to the box [lower, upper]."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise ValueError("box bounds must satisfy lower <= upper")
    return np.minimum(np.maximum(z, lower), upper)


class ZeroProx(ProxOracle):
    """phi = 0; prox is the identity."""

    def value(self, x):
        return 0.0

    def prox(self, z, zeta):
        return z


@dataclass(frozen=True)
class L1Norm(ProxOracle):
    tau: float

    def value(self, x):
        return float(self.tau * np.abs(x).sum())

    def prox(self, z, zeta):
        return soft_threshold(z, zeta * self.tau)


@dataclass(frozen=True, eq=False)
class BoxIndicator(ProxOracle):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if np.any(lower > upper):
            raise ValueError("box bounds must satisfy lower <= upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def value(self, x):
        if np.all(x >= self.lower) and np.all(x <= self.upper):
            return 0.0
        return np.inf

    def prox(self, z, zeta):
        return box_projection(z, self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """F(x) = f(x) + phi(x) with an optional certified reference optimum."""

    smooth: SmoothOracle
    nonsmooth: ProxOracle
    f_ref: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.smooth.dim

    @property
    def lipschitz(self):
        return self.smooth.lipschitz

    def objective(self, x):
        return self.smooth.value(x) + self.nonsmooth.value(x)

    __call__ = objective

    def with_reference(self, f_ref):
        return CompositeProblem(self.smooth, self.nonsmooth, float(f_ref), dict(self.info))


# ---------------------------------------------------------------------------
# generators


def _rescaled_spectrum(lam, q):
    lo, hi = lam[0], lam[-1]
    if hi - lo <= 0.0:
        return np.ones_like(lam)
    out = q + (lam - lo) * (1.0 - q) / (hi - lo)
    out[0], out[-1] = q, 1.0
    return out


def gen_quadratic(d, q, seed):
    """Random strongly convex quadratic with spectrum in [q, 1] hitting both ends.

    Q starts as A'A for a standard normal A; its eigenvalues are mapped affinely
    onto [q, 1] so that mu = q and L = 1 exactly.  p is standard normal.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    p = rng.standard_normal(d)
    lam, V = np.linalg.eigh(A.T @ A)
    lam = _rescaled_spectrum(lam, q)
    return QuadraticProblem(_spectrum_matrix(V, lam), p, lam, V)


def fixed_quadratic_case2():
    """Q = diag(0.01, 1), p = 0; the optimum is the origin."""
    lam = np.array([0.01, 1.0])
    return QuadraticProblem(np.diag(lam), np.zeros(2), lam, np.eye(2))


def logsumexp_oracle(A, b, eta):
    return LogSumExp(A, b, eta)


def gen_logsumexp(m, d, eta, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, d))
    b = rng.standard_normal(m)
    return LogSumExp(A, b, eta)


def gen_lasso(m, d, s, tau, noise_var=0.1, seed=0):
    """Sparse linear regression: 1/2||Ax - b||^2 + tau||x||_1.

    x_true keeps the s largest-magnitude entries of a standard normal vector;
    b = A x_true + w with A ~ N(0, 1) and w ~ N(0, noise_var).
    """
    if not 0 < s <= d:
        raise ValueError("sparsity s must satisfy 0 < s <= d")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d)
    x_true = np.zeros(d)
    keep = np.argsort(-np.abs(v), kind="stable")[:s]
    x_true[keep] = v[keep]
    A = rng.standard_normal((m, d))
    noise = np.sqrt(noise_var) * rng.standard_normal(m)
    b = A @ x_true + noise
    info = {"m": m, "d": d, "s": s, "tau": tau, "noise_var": noise_var, "seed": seed,
            "x_true": x_true}
    return CompositeProblem(LeastSquares(A, b), L1Norm(tau), info=info)


def gen_boxqp(d, cond, seed):
    """Box-constrained QP on [-1, 1]^d with condition number ``cond`` and L = 1."""
    if cond < 1:
        raise ValueError("condition number must be >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    p = rng.standard_normal(d)
    lam, V = np.linalg.eigh(A.T @ A)
    lam = _rescaled_spectrum(lam, 1.0 / cond)
    quad = QuadraticProblem(_spectrum_matrix(V, lam), p, lam, V)
    box = BoxIndicator(-np.ones(d), np.ones(d))
    return CompositeProblem(quad, box, info={"d": d, "cond": cond, "seed": seed})


# ---------------------------------------------------------------------------
# oracle hygiene checks


def gradient_check(oracle, points):
    """Worst relative error between ``oracle.gradient`` and central differences.

    Uses step h_i = 1e-6 * (1 + |x_i|) per coordinate.
    """
    worst = 0.0
    for x in points:
        x = np.asarray(x, dtype=float)
        g = oracle.gradient(x)
        fd = np.empty_like(x)
        for i in range(x.size):
            h = 1e-6 * (1.0 + abs(x[i]))
            e = np.zeros_like(x)
            e[i] = h
            fd[i] = (oracle.value(x + e) - oracle.value(x - e)) / (2.0 * h)
        scale = max(np.linalg.norm(g), np.finfo(float).tiny)
        worst = max(worst, np.linalg.norm(fd - g) / scale)
    return worst


def lipschitz_check(oracle, pairs):
    """Largest observed ratio ||grad f(x) - grad f(y)|| / (L ||x - y||); valid L gives <= 1."""
    worst = 0.0
    for x, y in pairs:
        num = np.linalg.norm(oracle.gradient(x) - oracle.gradient(y))
        den = oracle.lipschitz * np.linalg.norm(x - y)
        if den > 0:
            worst = max(worst, num / den)
    return worst


def prox_check(prox, dim, rng, zeta=1.0, n=20, scale=2.0, slack=1e-12):
    """Sample nonexpansiveness and prox-optimality of ``prox``.

    Returns (max expansion ratio, worst optimality excess); a valid prox gives
    ratio <= 1 and excess <= 0 up to ``slack``.
    """
    ratio = 0.0
    excess = -np.inf
    for _ in range(n):
        z1 = scale * rng.standard_normal(dim)
        z2 = scale * rng.standard_normal(dim)
        u1 = prox.prox(z1, zeta)
        u2 = prox.prox(z2, zeta)
        ratio = max(ratio, np.linalg.norm(u1 - u2) / np.linalg.norm(z1 - z2))
        base = 0.5 * np.sum((z1 - u1) ** 2) + zeta * prox.value(u1)
        for eps in (1e-1, 1e-3, 1e-6):
            x = u1 + eps * rng.standard_normal(dim)
            # second candidate stays inside dom(phi) for indicator functions
            for x in (x, prox.prox(x, zeta)):
                other = 0.5 * np.sum((z1 - x) ** 2) + zeta * prox.value(x)
                if np.isfinite(other):
                    excess = max(excess, (base - other) / max(1.0, abs(base)) - slack)
    return ratio, excess
