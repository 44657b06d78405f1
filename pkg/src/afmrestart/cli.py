"""Command-line harness reproducing the quadratic, log-sum-exp, LASSO and box-QP experiments.

Usage::

    afmrestart run case1 --iters 3000 --out runs/case1
    afmrestart run case2 --solvers gm,ogmp+gr:1.0,ogmp+gr:0.5
    afmrestart tuned-rates --q 0.1
    afmrestart rho-curve --q 0.1 --beta 0.4 --gamma 0.6

Solver names are ``method[+fr|+gr][:sigma_bar]``.  Smooth methods: gm, gm-q,
fgm, fgm-q, fgmp-q, ogm, ogmp, ogm-q.  Composite methods: ista, fista, pogm.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .engine import (
    SolverConfig,
    afm_run,
    iterations_to_tol,
    ogm_restart_run,
    pogm_restart_run,
    proximal_gradient_run,
    relative_gap,
)
from .oracles import (
    CompositeProblem,
    fixed_quadratic_case2,
    gen_boxqp,
    gen_lasso,
    gen_logsumexp,
    gen_quadratic,
)
from .schedules import KINDS, ScheduleKind, coefficients

log = logging.getLogger("afmrestart")

EXPERIMENTS = ("case1", "case2", "logsumexp", "lasso", "boxqp", "tuned-rates", "rho-curve")
# older name kept so existing scripts keep working
ALIASES = {"table3": "tuned-rates"}
SMOOTH_METHODS = tuple(KINDS)
COMPOSITE_METHODS = ("ista", "fista", "pogm")
RESTARTABLE = ("fgm", "ogmp", "fista", "pogm")
RESTART_SUFFIX = {"fr": "function", "gr": "gradient"}
REFERENCE_FACTOR = 10
DEFAULT_POGM_SIGMA = 0.8

DEFAULTS = {
    "case1": dict(d=500, q=1e-4, iters=3000,
                  solvers="gm,fgm,ogmp,fgm-q,ogm-q,fgm+fr,fgm+gr,ogmp+fr,ogmp+gr"),
    "case2": dict(iters=500, solvers="gm,fgm+gr,ogmp+gr:1.0,ogmp+gr:0.8,ogmp+gr:0.5"),
    "logsumexp": dict(m=100, d=20, eta="1,10", iters=1500,
                      solvers="gm,fgm,ogmp,fgm+fr,fgm+gr,ogmp+fr,ogmp+gr"),
    "lasso": dict(m=500, d=2000, s=100, tau=2.0, noise_var=0.1, iters=500,
                  solvers="ista,fista,fista+fr,fista+gr,pogm,pogm+fr,pogm+gr"),
    "boxqp": dict(d=500, cond=1e7, iters=500,
                  solvers="ista,fista,fista+fr,fista+gr,pogm,pogm+fr,pogm+gr"),
    "tuned-rates": dict(q=0.1),
    "rho-curve": dict(q=0.1, n_lambda=200),
}
COMMON_DEFAULTS = dict(seed=0, tol=1e-8, out="runs", restart=None, sigma_bar=None)


class UsageError(ValueError):
    """Bad experiment or solver name; reported with exit status 2."""


@dataclass
class SolverSpec:
    method: str
    restart: str = "none"
    sigma_bar: float | None = None

    @property
    def label(self):
        out = self.method
        if self.restart != "none":
            out += "+" + {"function": "fr", "gradient": "gr"}[self.restart]
        if self.sigma_bar is not None:
            out += f":{self.sigma_bar:g}"
        return out

    @property
    def composite(self):
        return self.method in COMPOSITE_METHODS


def parse_solver(text, default_restart=None, default_sigma=None):
    """Parse ``method[+fr|+gr][:sigma_bar]``."""
    text = text.strip()
    sigma = None
    if ":" in text:
        text, s = text.split(":", 1)
        try:
            sigma = float(s)
        except ValueError:
            raise UsageError(f"bad sigma_bar in solver name: {s!r}") from None
    method, _, suffix = text.partition("+")
    method = {"pgm": "ista"}.get(method, method)
    if method not in SMOOTH_METHODS and method not in COMPOSITE_METHODS:
        raise UsageError(f"unknown solver {method!r}")
    if suffix:
        if suffix not in RESTART_SUFFIX:
            raise UsageError(f"unknown restart suffix {suffix!r}; use +fr or +gr")
        restart = RESTART_SUFFIX[suffix]
    elif default_restart and method in RESTARTABLE:
        restart = default_restart
    else:
        restart = "none"
    if restart != "none" and method not in RESTARTABLE:
        raise UsageError(f"solver {method!r} does not support restart")
    if sigma is None and method in ("ogmp", "pogm"):
        sigma = default_sigma if default_sigma is not None else (
            DEFAULT_POGM_SIGMA if method == "pogm" else None)
    if sigma is not None:
        if method not in ("ogmp", "pogm"):
            raise UsageError(f"solver {method!r} has no gamma to decrease")
        if not 0.0 <= sigma <= 1.0:
            raise UsageError("sigma_bar must lie in [0, 1]")
    return SolverSpec(method, restart, sigma)


def run_solver(spec, problem, x0, iters, q=None):
    """Run one solver; ``q`` is required by the *-q schedules."""
    if spec.composite:
        if spec.method == "pogm":
            cfg = SolverConfig(ScheduleKind("ogmp"), spec.restart, spec.sigma_bar, iters)
            trace = pogm_restart_run(problem, cfg, x0)
        else:
            kind = ScheduleKind("gm" if spec.method == "ista" else "fgm")
            trace = proximal_gradient_run(problem, SolverConfig(kind, spec.restart, None, iters), x0)
    else:
        oracle = problem.smooth if isinstance(problem, CompositeProblem) else problem
        needs_q = KINDS[spec.method][0]
        if needs_q and q is None:
            raise UsageError(f"solver {spec.method!r} needs a known q for this problem")
        kind = ScheduleKind(spec.method, q if needs_q else None,
                            iters if spec.method == "ogm" else None)
        if spec.restart != "none" or spec.sigma_bar is not None:
            trace = ogm_restart_run(oracle, SolverConfig(kind, spec.restart, spec.sigma_bar, iters), x0)
        else:
            trace = afm_run(oracle, kind, x0, iters)
    trace.method = spec.label
    return trace


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentSpec:
    name: str
    params: dict = field(default_factory=dict)
    solvers: list = field(default_factory=list)
    iters: int = 1000
    seed: int = 0
    out: str = "runs"
    tol: float = 1e-8

    def __post_init__(self):
        self.name = ALIASES.get(self.name, self.name)
        if self.name not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.name!r}; expected one of {EXPERIMENTS}")
        composite = self.name in ("lasso", "boxqp")
        for s in self.solvers:
            if composite and not s.composite:
                raise UsageError(f"{self.name} is composite; {s.method!r} is not a proximal solver")
            if not composite and s.composite:
                raise UsageError(f"{self.name} is smooth; use smooth solvers instead of {s.method!r}")


def _safe(label):
    return label.replace("+", "-").replace(":", "_s")


def build_problems(spec):
    """[(problem name, problem, x0, known q, exact optimum or None, info dict)]."""
    p = spec.params
    if spec.name == "case1":
        prob = gen_quadratic(int(p["d"]), float(p["q"]), spec.seed)
        name = f"quad-d{int(p['d'])}-q{float(p['q']):g}-seed{spec.seed}"
        return [(name, prob, np.zeros(prob.dim), prob.q, prob.f_star, {})]
    if spec.name == "case2":
        prob = fixed_quadratic_case2()
        return [("case2", prob, np.array([0.2, 1.0]), prob.q, 0.0, {})]
    if spec.name == "logsumexp":
        out = []
        for eta in _floats(p["eta"]):
            prob = gen_logsumexp(int(p["m"]), int(p["d"]), eta, spec.seed)
            out.append((f"lse-m{int(p['m'])}-d{int(p['d'])}-eta{eta:g}-seed{spec.seed}",
                        prob, np.zeros(prob.dim), None, None, {}))
        return out
    if spec.name == "lasso":
        prob = gen_lasso(int(p["m"]), int(p["d"]), int(p["s"]), float(p["tau"]),
                         float(p["noise_var"]), spec.seed)
        name = f"lasso-m{int(p['m'])}-d{int(p['d'])}-s{int(p['s'])}-tau{float(p['tau']):g}-seed{spec.seed}"
        return [(name, prob, np.zeros(prob.dim), None, None, {})]
    if spec.name == "boxqp":
        prob = gen_boxqp(int(p["d"]), float(p["cond"]), spec.seed)
        name = f"boxqp-d{int(p['d'])}-cond{float(p['cond']):g}-seed{spec.seed}"
        return [(name, prob, np.zeros(prob.dim), None, None, {})]
    raise UsageError(f"{spec.name} is not a solver experiment")


def _floats(v):
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(s) for s in str(v).split(",") if s.strip()]


def reference_run(problem, x0, iters):
    """Long POGM'-FR run (sigma_bar 0.8) used to certify the reference optimum."""
    cfg = SolverConfig(ScheduleKind("ogmp"), "function", DEFAULT_POGM_SIGMA,
                       REFERENCE_FACTOR * iters)
    return pogm_restart_run(problem, cfg, x0)


def _best(values):
    finite = values[np.isfinite(values)]
    return float(finite.min()) if finite.size else math.inf


def run_experiment(spec):
    """Run every (solver, problem) pair; write one CSV each plus summary.csv and problems.csv."""
    if spec.name == "tuned-rates":
        os.makedirs(spec.out, exist_ok=True)
        with open(os.path.join(spec.out, "tuned_rates.csv"), "w", newline="") as fh:
            emit_tuned_rates(float(spec.params["q"]), fh)
        return []
    if spec.name == "rho-curve":
        os.makedirs(spec.out, exist_ok=True)
        with open(os.path.join(spec.out, "rho_curve.csv"), "w", newline="") as fh:
            emit_rho_curve(float(spec.params["q"]), fh, method=spec.params.get("method"),
                           beta=spec.params.get("beta"), gamma=spec.params.get("gamma"),
                           alpha=spec.params.get("alpha"),
                           n_lambda=int(spec.params.get("n_lambda", 200)))
        return []

    os.makedirs(spec.out, exist_ok=True)
    summary = []
    problem_rows = []
    for pname, prob, x0, q, f_exact, info in build_problems(spec):
        traces = []
        for s in spec.solvers:
            log.info("%s: running %s for %d iterations", pname, s.label, spec.iters)
            tr = run_solver(s, prob, x0, spec.iters, q)
            traces.append(tr)
            tr.write_csv(os.path.join(spec.out, f"{pname}__{_safe(s.label)}.csv"))
        if f_exact is not None:
            f_ref = f_exact
            problem_rows.append((pname, "f_ref_source", "exact"))
        else:
            ref = reference_run(prob, x0, spec.iters)
            f_ref = min([_best(ref.monitored)] + [_best(t.monitored) for t in traces])
            problem_rows.append((pname, "f_ref_source", f"pogm+fr:{DEFAULT_POGM_SIGMA:g} x{REFERENCE_FACTOR}"))
            x_ref = ref.x_last
            if spec.name == "boxqp":
                active = int(np.sum(np.abs(x_ref) >= 1.0))
                problem_rows.append((pname, "active_constraints", str(active)))
            if spec.name == "lasso":
                problem_rows.append((pname, "nonzeros", str(int(np.count_nonzero(x_ref)))))
        f0 = prob.objective(x0) if isinstance(prob, CompositeProblem) else prob.value(x0)
        problem_rows += [
            (pname, "f_ref", format(f_ref, ".17g")),
            (pname, "f0", format(f0, ".17g")),
            (pname, "L", format(prob.lipschitz, ".17g")),
        ]
        if q is not None:
            problem_rows.append((pname, "q", format(q, ".17g")))
        for tr in traces:
            gap = relative_gap(tr.monitored, f_ref, f0)
            ky = _first_hit(tr.column("f_y"), f_ref, f0, spec.tol)
            kx = _first_hit(tr.column("F_x"), f_ref, f0, spec.tol)
            summary.append({
                "problem": pname,
                "solver": tr.method,
                "output": tr.output,
                "iters_run": len(tr) - 1,
                "iters_to_tol": _fmt_opt(iterations_to_tol(tr, f_ref, spec.tol, f0)),
                "iters_to_tol_y": _fmt_opt(ky),
                "iters_to_tol_x": _fmt_opt(kx),
                "final_rel_gap": format(float(gap[-1]), ".17g"),
                "restarts": tr.restarts,
                "gd_gamma_events": tr.gd_events,
                "status": tr.status,
            })
    _write_rows(os.path.join(spec.out, "summary.csv"), summary)
    with open(os.path.join(spec.out, "problems.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("problem", "key", "value"))
        w.writerows(problem_rows)
    return summary


def _first_hit(values, f_ref, f0, tol):
    gap = relative_gap(values, f_ref, f0)
    hit = np.nonzero(gap <= tol)[0]
    return int(hit[0]) if hit.size else None


def _fmt_opt(v):
    return "" if v is None else v


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


# ---------------------------------------------------------------------------
# analysis tables


def emit_tuned_rates(q, fh):
    """Write rows (method, alpha*L, beta, gamma, rho) for GM-q, FGM-q, FGM'-q, OGM-q."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("method", "alpha", "beta", "gamma", "rho"))
    for row in analysis.tuned_rates(q):
        w.writerow((row[0],) + tuple(format(v, ".17g") for v in row[1:]))


RHO_METHODS = ("gm", "gm-q", "fgm-q", "fgmp-q", "ogm-q")


def emit_rho_curve(q, fh, method=None, beta=None, gamma=None, alpha=None, n_lambda=200):
    """Write (method, lambda, |r1|, |r2|, rho) over lambda in [mu, L] with L = 1."""
    if method is not None:
        if method not in RHO_METHODS:
            raise UsageError(f"rho-curve method must be one of {RHO_METHODS}")
        c = coefficients(ScheduleKind(method, q if KINDS[method][0] else None), 0)
        a, b, g, label = c.alpha, c.beta, c.gamma, method
    else:
        if beta is None or gamma is None:
            raise UsageError("rho-curve needs --method or both --beta and --gamma")
        a = 1.0 if alpha is None else float(alpha)
        b, g, label = float(beta), float(gamma), "custom"
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("method", "lambda", "r1_abs", "r2_abs", "rho"))
    for row in analysis.rho_curve(q, b, g, n_lambda, a):
        w.writerow((label,) + tuple(format(v, ".17g") for v in row))


# ---------------------------------------------------------------------------
# argument handling


def read_config(path):
    """Plain ``key = value`` lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _add_common(p):
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--tol", type=float, help="relative-gap target for the summary (default 1e-8)")
    p.add_argument("--sigma-bar", type=float, dest="sigma_bar")
    p.add_argument("--restart", choices=("none", "fr", "gr"),
                   help="restart applied to restartable solvers listed without a suffix")
    p.add_argument("--solvers", help="comma-separated solver names")
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    for name, typ in (("d", int), ("m", int), ("s", int), ("q", float), ("tau", float),
                      ("eta", str), ("cond", float), ("noise-var", float)):
        p.add_argument(f"--{name}", type=typ, dest=name.replace("-", "_"))


def build_parser():
    parser = argparse.ArgumentParser(prog="afmrestart", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[verbose], help="run an experiment and write CSV traces")
    run.add_argument("experiment")
    _add_common(run)
    run.add_argument("--method")
    run.add_argument("--beta", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--alpha", type=float)
    run.add_argument("--n-lambda", type=int, dest="n_lambda")

    t3 = sub.add_parser("tuned-rates", aliases=list(ALIASES), parents=[verbose], help="tuned constant-coefficient methods and their rates")
    t3.add_argument("--q", type=float, required=True)
    t3.add_argument("--out", help="output CSV file (default: stdout)")

    rc = sub.add_parser("rho-curve", parents=[verbose], help="per-eigenvalue root magnitudes over [mu, L]")
    rc.add_argument("--q", type=float, required=True)
    rc.add_argument("--method", help=f"one of {', '.join(RHO_METHODS)}")
    rc.add_argument("--beta", type=float)
    rc.add_argument("--gamma", type=float)
    rc.add_argument("--alpha", type=float, help="step size in units of 1/L (default 1)")
    rc.add_argument("--n-lambda", type=int, default=200, dest="n_lambda")
    rc.add_argument("--out", help="output CSV file (default: stdout)")
    return parser


def spec_from_args(args):
    name = ALIASES.get(args.experiment, args.experiment)
    if name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {name!r}; expected one of {', '.join(EXPERIMENTS)}")
    merged = dict(COMMON_DEFAULTS)
    merged.update(DEFAULTS[name])
    if args.config:
        merged.update(read_config(args.config))
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "experiment", "config", "verbose"):
            merged[k] = v
    restart = merged.pop("restart")
    default_restart = None if restart in (None, "none") else RESTART_SUFFIX[restart]
    sigma = merged.pop("sigma_bar")
    sigma = None if sigma is None else float(sigma)
    solvers_text = merged.pop("solvers", "")
    solvers, seen = [], set()
    for item in str(solvers_text).split(","):
        if item.strip():
            s = parse_solver(item, default_restart, sigma)
            if s.label not in seen:
                seen.add(s.label)
                solvers.append(s)
    iters = int(merged.pop("iters", 1000))
    seed = int(merged.pop("seed"))
    out = str(merged.pop("out"))
    tol = float(merged.pop("tol"))
    if name in ("tuned-rates", "rho-curve"):
        return ExperimentSpec(name, merged, [], iters, seed, out, tol)
    return ExperimentSpec(name, merged, solvers, iters, seed, os.path.join(out, name), tol)


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if ALIASES.get(args.command, args.command) == "tuned-rates":
            fh = _open_out(args.out)
            try:
                emit_tuned_rates(args.q, fh)
            finally:
                if fh is not sys.stdout:
                    fh.close()
            return 0
        if args.command == "rho-curve":
            fh = _open_out(args.out)
            try:
                emit_rho_curve(args.q, fh, args.method, args.beta, args.gamma, args.alpha,
                               args.n_lambda)
            finally:
                if fh is not sys.stdout:
                    fh.close()
            return 0
        spec = spec_from_args(args)
        summary = run_experiment(spec)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"afmrestart: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"afmrestart: error: {exc}", file=sys.stderr)
        return 1
    for row in summary:
        print(f"{row['problem']:<40} {row['solver']:<16} iters_to_tol={row['iters_to_tol']!s:<6} "
              f"final_gap={float(row['final_rel_gap']):.3e} restarts={row['restarts']}")
    print(f"wrote {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
