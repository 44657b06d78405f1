"""Per-iteration AFM coefficients (alpha, beta_k, gamma_k) for the named methods.

``alpha`` is expressed in units of 1/L; the engine divides by L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .analysis import ogm_q_coeffs

__all__ = [
    "KINDS",
    "Coefficients",
    "ScheduleKind",
    "ScheduleState",
    "Schedule",
    "t_next",
    "theta_next",
    "coefficients",
    "advance",
    "parse_kind",
]

# CLI name -> whether the kind needs q / needs N / carries a t_k (or theta_k) sequence
KINDS = {
    "gm": (False, False, False),
    "gm-q": (True, False, False),
    "fgm": (False, False, True),
    "fgm-q": (True, False, False),
    "fgmp-q": (True, False, False),
    "ogm": (False, True, True),
    "ogmp": (False, False, True),
    "ogm-q": (True, False, False),
}


@dataclass(frozen=True)
class Coefficients:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (math.isfinite(self.beta) and math.isfinite(self.gamma)):
            raise ValueError("beta and gamma must be finite")


@dataclass(frozen=True)
class ScheduleKind:
    name: str
    q: float | None = None
    N: int | None = None

    def __post_init__(self):
        if self.name not in KINDS:
            raise ValueError(f"unknown schedule {self.name!r}; expected one of {sorted(KINDS)}")
        needs_q, needs_n, _ = KINDS[self.name]
        if needs_q:
            if self.q is None:
                raise ValueError(f"schedule {self.name!r} requires q")
            if not 0.0 < self.q <= 1.0:
                raise ValueError("q must lie in (0, 1]")
        if needs_n:
            if self.N is None:
                raise ValueError(f"schedule {self.name!r} requires the iteration count N")
            if self.N < 1:
                raise ValueError("N must be >= 1")

    @property
    def uses_t(self):
        return KINDS[self.name][2]

    @property
    def has_gamma(self):
        return self.name in ("ogm", "ogmp", "ogm-q")


def parse_kind(name, q=None, N=None):
    needs_q, needs_n, _ = KINDS.get(name, (False, False, False))
    return ScheduleKind(name, q if needs_q else None, N if needs_n else None)


def t_next(t):
    if t < 1.0:
        raise ValueError("t must be >= 1")
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def theta_next(theta, is_last):
    if theta < 1.0:
        raise ValueError("theta must be >= 1")
    c = 8.0 if is_last else 4.0
    return 0.5 * (1.0 + math.sqrt(1.0 + c * theta * theta))


@dataclass(frozen=True)
class ScheduleState:
    """Running momentum parameter (t_k, or theta_k for OGM) at iteration k."""

    k: int = 0
    t: float = 1.0


def _next_param(kind, state):
    if kind.name == "ogm":
        if state.k >= kind.N:
            raise ValueError(f"OGM(N={kind.N}) has no coefficients for k = {state.k}")
        return theta_next(state.t, is_last=(state.k + 1 == kind.N))
    return t_next(state.t)


def coefficients(kind, k, state=None):
    """Coefficients used to form x_{k+1}; ``state`` carries t_k (or theta_k)."""
    if state is None:
        state = ScheduleState(k=k)
    elif state.k != k:
        state = replace(state, k=k)
    name = kind.name
    if name == "gm":
        return Coefficients(1.0, 0.0, 0.0)
    if name == "gm-q":
        return Coefficients(2.0 / (1.0 + kind.q), 0.0, 0.0)
    if name == "fgm-q":
        sq = math.sqrt(kind.q)
        return Coefficients(1.0, (1.0 - sq) / (1.0 + sq), 0.0)
    if name == "fgmp-q":
        sq, s3 = math.sqrt(kind.q), math.sqrt(3.0 + kind.q)
        return Coefficients(4.0 / (kind.q + 3.0), (s3 - 2.0 * sq) / (s3 + 2.0 * sq), 0.0)
    if name == "ogm-q":
        beta, gamma, _ = ogm_q_coeffs(kind.q)
        return Coefficients(1.0, beta, gamma)
    t = state.t
    tn = _next_param(kind, state)
    beta = (t - 1.0) / tn
    gamma = t / tn if kind.has_gamma else 0.0
    return Coefficients(1.0, beta, gamma)


def advance(kind, state):
    """State for iteration k + 1."""
    if kind.uses_t:
        return ScheduleState(state.k + 1, _next_param(kind, state))
    return ScheduleState(state.k + 1, state.t)


class Schedule:
    """Iterator over coefficients owning its own state, so restarts stay local."""

    def __init__(self, kind):
        self.kind = kind
        self.state = ScheduleState()

    def reset(self):
        self.state = ScheduleState()

    def __iter__(self):
        return self

    def __next__(self):
        c = coefficients(self.kind, self.state.k, self.state)
        self.state = advance(self.kind, self.state)
        return c
