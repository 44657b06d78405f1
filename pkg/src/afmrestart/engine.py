"""Solvers: plain AFM, OGM'/FGM with adaptive restart, ISTA/FISTA, POGM' and fixed restart.

Every runner returns a :class:`Trace`.  Row ``k`` of a trace describes the
iterates (x_k, y_k); its ``restart``/``gd_gamma``/``sigma``/``beta``/``gamma``
fields describe the step that produced them, and ``grad_norm`` is the norm of
the (composite) gradient evaluated at x_k during iteration k.  The final row of
a budget-limited run has no such evaluation and carries NaN.

For the proximal solvers only one sequence passes through the prox; the other
(FISTA's extrapolated x_k, POGM's gradient-step y_k) may leave dom phi, so its
column records the smooth value f rather than F = f + phi.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields

import numpy as np

from .oracles import CompositeProblem, ZeroProx
from .schedules import Schedule, ScheduleKind, t_next

__all__ = [
    "RESTART_MODES",
    "SolverConfig",
    "TraceRecord",
    "Trace",
    "afm_run",
    "ogm_restart_run",
    "proximal_gradient_run",
    "pogm_restart_run",
    "fixed_restart_run",
    "gr_condition",
    "gdgamma_condition",
    "composite_gradient_mapping",
    "k_fixed",
    "relative_gap",
    "iterations_to_tol",
    "monotonicity_violations",
    "CSV_HEADER",
]

RESTART_MODES = ("none", "function", "gradient")
CSV_HEADER = ("k", "f_y", "F_x", "grad_norm", "restart", "gd_gamma", "sigma", "beta", "gamma")
GAP_FLOOR = 1e-16


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``sigma_bar`` of None disables the gamma-decrease rule; otherwise sigma is
    multiplied by ``sigma_bar`` whenever successive gradients form an obtuse angle.
    """

    schedule: ScheduleKind
    restart: str = "none"
    sigma_bar: float | None = None
    max_iters: int = 1000
    grad_tol: float = 0.0
    fixed_restart_interval: int | None = None
    keep_iterates: bool = False

    def __post_init__(self):
        if self.restart not in RESTART_MODES:
            raise ValueError(f"restart must be one of {RESTART_MODES}")
        if self.sigma_bar is not None:
            if not 0.0 <= self.sigma_bar <= 1.0:
                raise ValueError("sigma_bar must lie in [0, 1]")
            if not self.schedule.has_gamma:
                raise ValueError("gamma decrease needs a schedule with over-relaxation")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")
        if self.fixed_restart_interval is not None and self.fixed_restart_interval < 1:
            raise ValueError("fixed restart interval must be >= 1")

    @property
    def gamma_decrease(self):
        return self.sigma_bar is not None


@dataclass
class TraceRecord:
    k: int
    f_y: float
    F_x: float
    grad_norm: float = math.nan
    restart: bool = False
    gd_gamma: bool = False
    sigma: float = 1.0
    beta: float = math.nan
    gamma: float = math.nan


@dataclass
class Trace:
    """Per-iteration records of one solver run.

    ``output`` names the sequence the method reports: 'y' (primary) or 'x'
    (secondary); ``monitored`` returns the matching objective column.
    """

    method: str
    output: str = "y"
    records: list = field(default_factory=list)
    status: str = "max_iters"
    n_grad: int = 0
    n_prox: int = 0
    xs: list | None = None
    ys: list | None = None
    x_last: np.ndarray | None = None
    y_last: np.ndarray | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name):
        if name not in CSV_HEADER:
            raise KeyError(name)
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def monitored(self):
        return self.column("f_y" if self.output == "y" else "F_x")

    @property
    def restarts(self):
        return int(sum(r.restart for r in self.records))

    @property
    def gd_events(self):
        return int(sum(r.gd_gamma for r in self.records))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            self.to_csv(fh)

    def to_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.records:
            writer.writerow(_format_row(r))

    @classmethod
    def read_csv(cls, path, method="", output="y"):
        trace = cls(method, output)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != CSV_HEADER:
                raise ValueError(f"unexpected trace header {header}")
            for row in reader:
                trace.records.append(TraceRecord(
                    int(row[0]), float(row[1]), float(row[2]), float(row[3]),
                    row[4] == "1", row[5] == "1",
                    float(row[6]), float(row[7]), float(row[8]),
                ))
        return trace


def _format_row(r):
    out = []
    for f, v in zip(fields(TraceRecord), astuple(r)):
        if f.name == "k":
            out.append(str(v))
        elif isinstance(v, bool):
            out.append("1" if v else "0")
        else:
            out.append(format(float(v), ".17g"))
    return out


# ---------------------------------------------------------------------------
# conditions


def gr_condition(grad, y_next, y):
    """Gradient restart: <-grad, y_next - y> < 0 (strict)."""
    return float(-grad @ (y_next - y)) < 0.0


def gdgamma_condition(grad, grad_prev):
    """Decrease gamma when successive gradients form an obtuse angle (strict)."""
    return float(grad @ grad_prev) < 0.0


def composite_gradient_mapping(grad, x_next, z_next, zeta):
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    return grad - (x_next - z_next) / zeta


def k_fixed(q):
    """Restart interval e*sqrt(2/q) minimizing the fixed-restart OGM bound."""
    if not q > 0:
        raise ValueError("q must be positive")
    return math.e * math.sqrt(2.0 / q)


# ---------------------------------------------------------------------------
# runners


def _finite(*vecs):
    return all(np.all(np.isfinite(v)) for v in vecs)


def _store(trace, x, y):
    trace.x_last, trace.y_last = x, y
    if trace.xs is not None:
        trace.xs.append(np.array(x, copy=True))
        trace.ys.append(np.array(y, copy=True))


def _new_trace(method, output, keep):
    trace = Trace(method, output)
    if keep:
        trace.xs, trace.ys = [], []
    return trace


def afm_run(oracle, schedule, x0, iters, keep_iterates=False, grad_tol=0.0):
    """Accelerated first-order method with a fixed coefficient schedule.

    y_{k+1} = x_k - (alpha/L) grad f(x_k)
    x_{k+1} = y_{k+1} + beta_k (y_{k+1} - y_k) + gamma_k (y_{k+1} - x_k)
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    kind = schedule.kind if isinstance(schedule, Schedule) else schedule
    sched = Schedule(kind)
    L = oracle.lipschitz
    x = np.array(x0, dtype=float)
    y = x.copy()
    trace = _new_trace(kind.name, "y", keep_iterates)
    fy = oracle.value(y)
    rec = TraceRecord(0, fy, oracle.value(x))
    for k in range(iters + 1):
        _store(trace, x, y)
        if not (_finite(x, y) and math.isfinite(rec.f_y)):
            trace.records.append(rec)
            trace.status = "nonfinite"
            break
        if k == iters:
            trace.records.append(rec)
            break
        g = oracle.gradient(x)
        trace.n_grad += 1
        rec.grad_norm = float(np.linalg.norm(g))
        trace.records.append(rec)
        if rec.grad_norm <= grad_tol:
            trace.status = "converged"
            break
        c = next(sched)
        y_new = x - (c.alpha / L) * g
        x_new = y_new + c.beta * (y_new - y) + c.gamma * (y_new - x)
        x, y = x_new, y_new
        rec = TraceRecord(k + 1, oracle.value(y), oracle.value(x), beta=c.beta, gamma=c.gamma)
    return trace


def ogm_restart_run(oracle, config, x0):
    """OGM' (or FGM when the schedule is 'fgm') with adaptive restart and decreasing gamma.

    On restart t_k <- 1 and sigma <- 1 before t_{k+1} is formed; otherwise, if
    gamma decrease is on and <grad f(x_k), grad f(x_{k-1})> < 0, sigma <- sigma_bar*sigma.
    """
    kind = config.schedule
    if kind.name not in ("ogmp", "fgm"):
        raise ValueError("adaptive restart needs the 'ogmp' or 'fgm' schedule")
    L = oracle.lipschitz
    x = np.array(x0, dtype=float)
    y = x.copy()
    t, sigma = 1.0, 1.0
    g_prev = None
    trace = _new_trace(kind.name, "y", config.keep_iterates)
    fy = oracle.value(y)
    rec = TraceRecord(0, fy, oracle.value(x))
    for k in range(config.max_iters + 1):
        _store(trace, x, y)
        if not (_finite(x, y) and math.isfinite(fy)):
            trace.records.append(rec)
            trace.status = "nonfinite"
            break
        if k == config.max_iters:
            trace.records.append(rec)
            break
        g = oracle.gradient(x)
        trace.n_grad += 1
        rec.grad_norm = float(np.linalg.norm(g))
        trace.records.append(rec)
        if rec.grad_norm <= config.grad_tol:
            trace.status = "converged"
            break
        y_new = x - (1.0 / L) * g
        fy_new = oracle.value(y_new)
        restart = gd = False
        if config.restart == "function":
            restart = fy_new > fy
        elif config.restart == "gradient":
            restart = gr_condition(g, y_new, y)
        if restart:
            t, sigma = 1.0, 1.0
        elif config.gamma_decrease and g_prev is not None and gdgamma_condition(g, g_prev):
            sigma *= config.sigma_bar
            gd = True
        tn = t_next(t)
        beta = (t - 1.0) / tn
        gamma = sigma * t / tn if kind.has_gamma else 0.0
        x_new = y_new + beta * (y_new - y) + gamma * (y_new - x)
        x, y, fy, g_prev, t = x_new, y_new, fy_new, g, tn
        rec = TraceRecord(k + 1, fy, oracle.value(x), restart=restart, gd_gamma=gd,
                          sigma=sigma, beta=beta, gamma=gamma)
    return trace


def proximal_gradient_run(problem, config, x0):
    """ISTA ('gm' schedule) or FISTA ('fgm') with optional adaptive restart.

    Restart tests use F(y_{k+1}) > F(y_k) or <-G, y_{k+1} - y_k> < 0 with the
    gradient mapping G = L (x_k - y_{k+1}).
    """
    kind = config.schedule
    if kind.name not in ("gm", "fgm"):
        raise ValueError("proximal gradient needs the 'gm' or 'fgm' schedule")
    if config.restart != "none" and kind.name == "gm":
        raise ValueError("ISTA has no momentum to restart")
    f, phi, F = problem.smooth, problem.nonsmooth, problem.objective
    L = f.lipschitz
    x = np.array(x0, dtype=float)
    y = x.copy()
    t = 1.0
    trace = _new_trace("ista" if kind.name == "gm" else "fista", "y", config.keep_iterates)
    Fy = F(y)
    rec = TraceRecord(0, Fy, f.value(x))
    for k in range(config.max_iters + 1):
        _store(trace, x, y)
        if not _finite(x, y):
            trace.records.append(rec)
            trace.status = "nonfinite"
            break
        if k == config.max_iters:
            trace.records.append(rec)
            break
        g = f.gradient(x)
        trace.n_grad += 1
        y_new = phi.prox(x - (1.0 / L) * g, 1.0 / L)
        trace.n_prox += 1
        G = L * (x - y_new)
        rec.grad_norm = float(np.linalg.norm(G))
        trace.records.append(rec)
        if rec.grad_norm <= config.grad_tol:
            trace.status = "converged"
            break
        Fy_new = F(y_new)
        restart = False
        if config.restart == "function":
            restart = Fy_new > Fy
        elif config.restart == "gradient":
            restart = gr_condition(G, y_new, y)
        if restart:
            t = 1.0
        if kind.name == "gm":
            beta = 0.0
            x_new = y_new
        else:
            tn = t_next(t)
            beta = (t - 1.0) / tn
            x_new = y_new + beta * (y_new - y)
            t = tn
        x, y, Fy = x_new, y_new, Fy_new
        rec = TraceRecord(k + 1, Fy, f.value(x), restart=restart, beta=beta, gamma=0.0)
    return trace


def pogm_restart_run(problem, config, x0):
    """Proximal OGM' with restarting momentum and decreasing gamma.

    Reports the secondary sequence x_k.  The auxiliary y_k is never passed through
    the prox (it can sit outside dom phi), so its column holds the smooth value f(y_k).
    The restart tests use F(x_{k+1}) > F(x_k)
    or <-G(x_k), y_{k+1} - y_k> < 0 and reset t_{k+1} <- 1, sigma <- 1, so the
    reset takes effect from the next iteration on.
    """
    if isinstance(problem, CompositeProblem):
        f, phi = problem.smooth, problem.nonsmooth
    else:
        f, phi = problem, ZeroProx()
    if config.schedule.name != "ogmp":
        raise ValueError("POGM' uses the 'ogmp' schedule")

    def F(v):
        return f.value(v) + phi.value(v)

    L = f.lipschitz
    x = np.array(x0, dtype=float)
    u, z, y = x.copy(), x.copy(), x.copy()
    t, sigma = 1.0, 1.0
    # zeta_0 only enters multiplied by (t_0 - 1) = 0
    zeta = 1.0 / L
    G_prev = None
    trace = _new_trace("pogm", "x", config.keep_iterates)
    Fx = F(x)
    rec = TraceRecord(0, f.value(y), Fx)
    for k in range(config.max_iters + 1):
        _store(trace, x, y)
        if not _finite(x, y):
            trace.records.append(rec)
            trace.status = "nonfinite"
            break
        if k == config.max_iters:
            trace.records.append(rec)
            break
        g = f.gradient(x)
        trace.n_grad += 1
        u_new = x - (1.0 / L) * g
        tn = t_next(t)
        beta = (t - 1.0) / tn
        gamma = sigma * t / tn
        z_new = (u_new + beta * (u_new - u) + gamma * (u_new - x)
                 - beta * (1.0 / (L * zeta)) * (x - z))
        zeta_new = (1.0 + beta + gamma) / L
        x_new = phi.prox(z_new, zeta_new)
        trace.n_prox += 1
        G = composite_gradient_mapping(g, x_new, z_new, zeta_new)
        rec.grad_norm = float(np.linalg.norm(G))
        trace.records.append(rec)
        if rec.grad_norm <= config.grad_tol:
            trace.status = "converged"
            break
        y_new = x - (1.0 / L) * G
        Fx_new = F(x_new)
        restart = gd = False
        if config.restart == "function":
            restart = Fx_new > Fx
        elif config.restart == "gradient":
            restart = gr_condition(G, y_new, y)
        if restart:
            tn, sigma = 1.0, 1.0
        elif config.gamma_decrease and G_prev is not None and gdgamma_condition(G, G_prev):
            sigma *= config.sigma_bar
            gd = True
        x, u, z, y = x_new, u_new, z_new, y_new
        zeta, t, Fx, G_prev = zeta_new, tn, Fx_new, G
        rec = TraceRecord(k + 1, f.value(y), Fx, restart=restart, gd_gamma=gd,
                          sigma=sigma, beta=beta, gamma=gamma)
    return trace


def fixed_restart_run(oracle, schedule, x0, interval, outer, keep_iterates=False):
    """Restart the schedule every ``interval`` iterations, re-seeding from x_{j,interval}.

    For the 'ogm' schedule the final-step damping is tied to the interval (N = interval).
    Reports the secondary sequence.
    """
    if interval < 1:
        raise ValueError("interval must be >= 1")
    if outer < 1:
        raise ValueError("outer must be >= 1")
    kind = schedule.kind if isinstance(schedule, Schedule) else schedule
    if kind.name == "ogm":
        kind = ScheduleKind("ogm", N=interval)
    sched = Schedule(kind)
    L = oracle.lipschitz
    x = np.array(x0, dtype=float)
    y = x.copy()
    trace = _new_trace(f"{kind.name}-fixed{interval}", "x", keep_iterates)
    rec = TraceRecord(0, oracle.value(y), oracle.value(x))
    k = 0
    for j in range(outer):
        sched.reset()
        y = x.copy()
        for i in range(interval):
            _store(trace, x, y)
            if not _finite(x, y):
                trace.records.append(rec)
                trace.status = "nonfinite"
                return trace
            g = oracle.gradient(x)
            trace.n_grad += 1
            rec.grad_norm = float(np.linalg.norm(g))
            trace.records.append(rec)
            c = next(sched)
            y_new = x - (c.alpha / L) * g
            x_new = y_new + c.beta * (y_new - y) + c.gamma * (y_new - x)
            x, y = x_new, y_new
            k += 1
            rec = TraceRecord(k, oracle.value(y), oracle.value(x),
                              restart=(i == 0 and j > 0), beta=c.beta, gamma=c.gamma)
    _store(trace, x, y)
    trace.records.append(rec)
    return trace


# ---------------------------------------------------------------------------
# trace metrics


def relative_gap(values, f_ref, f0=None):
    """(F_k - F_ref) / (F_0 - F_ref), floored at 1e-16."""
    values = np.asarray(values, dtype=float)
    if f0 is None:
        f0 = values[0]
    denom = f0 - f_ref
    if not denom > 0:
        raise ValueError("initial objective must exceed the reference optimum")
    with np.errstate(invalid="ignore"):
        gap = (values - f_ref) / denom
    return np.maximum(gap, GAP_FLOOR)


def iterations_to_tol(trace, f_ref, tol, f0=None):
    """First k with relative gap <= tol on the monitored sequence, or None."""
    gap = relative_gap(trace.monitored, f_ref, f0)
    hit = np.nonzero(gap <= tol)[0]
    return int(hit[0]) if hit.size else None


def monotonicity_violations(trace):
    """Row indices k where the monitored objective increased: M_k > M_{k-1}."""
    m = trace.monitored
    return [int(k) for k in np.nonzero(m[1:] > m[:-1])[0] + 1]
