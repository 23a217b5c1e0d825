"""Command-line harness: single solves, surface benchmarks and sweeps.

Every verb reads a TOML run config (``--config PATH`` or ``--config
preset:NAME``; each verb has a default preset) and writes UTF-8 CSV with a
header row.  Exit status is 0 on success, 1 for configuration or I/O
problems and 2 when a solver fails.

CSV schemas
-----------
solve
    ``surface, method, D, N, length, energy, iterations, residual,
    wall_time_ms, converged``; one row per method.  A geodesic coefficient
    file (JSON) is written per row next to the CSV.
bench
    the ``solve`` columns plus ``error``; failed rows keep their place with
    empty numeric fields.
sweep-alpha
    ``alpha, tau, energy`` (one row per accepted step); fitted rates go to
    ``<out>.rates.csv`` with ``alpha, rate, r_squared, samples, fit_ok``.
sweep-radius
    ``R, rate, r_squared, samples, fit_ok, length``; energy traces go to
    ``<out>.traces.csv`` with ``R, tau, energy``.
repeat
    ``epoch, start, length, energy, iterations, residual, wall_time_ms,
    converged, error`` where ``start`` is the space-separated start point.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .baseline import GdProblem, solve_gd
from .chebyshev import cgl_nodes
from .config import ConfigError, RunConfig, resolve_config
from .errors import GeoflowError
from .heatflow import HeatFlowProblem, SolveReport, solve

RESULT_COLUMNS = ("surface", "method", "D", "N", "length", "energy", "iterations",
                  "residual", "wall_time_ms", "converged")
BENCH_COLUMNS = RESULT_COLUMNS + ("error",)
TRACE_COLUMNS = ("alpha", "tau", "energy")
ALPHA_RATE_COLUMNS = ("alpha", "rate", "r_squared", "samples", "fit_ok")
RADIUS_COLUMNS = ("R", "rate", "r_squared", "samples", "fit_ok", "length")
RADIUS_TRACE_COLUMNS = ("R", "tau", "energy")
REPEAT_COLUMNS = ("epoch", "start", "length", "energy", "iterations", "residual",
                  "wall_time_ms", "converged", "error")

DEFAULT_PRESETS = {
    "solve": "preset:sphere",
    "bench": "preset:bench",
    "sweep-alpha": "preset:sweep_alpha",
    "sweep-radius": "preset:sweep_radius",
    "repeat": "preset:repeat",
}

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


@dataclass(frozen=True)
class ResultRow:
    surface: str
    method: str
    D: int
    N: int
    length: float
    energy: float
    iterations: int
    residual: float
    wall_time_ms: float
    converged: bool

    def as_list(self) -> list:
        return [self.surface, self.method, self.D, self.N, _fmt(self.length), _fmt(self.energy),
                self.iterations, _fmt(self.residual), f"{self.wall_time_ms:.3f}",
                _fmt_bool(self.converged)]


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``log(E - E_final) = c - rate * tau``."""

    rate: float
    intercept: float
    r_squared: float
    samples: int
    ok: bool


def _fmt(x) -> str:
    # repr round-trips, so identical runs give identical text
    return repr(float(x))


def _fmt_bool(b) -> str:
    return "true" if b else "false"


def fit_decay_rate(trace, E_final: Optional[float] = None, upper: float = 0.9,
                   lower: float = 0.01, min_samples: int = 10) -> DecayFit:
    """Fit the exponential decay rate of an energy trace.

    The window keeps samples whose gap ``E - E_final`` lies between
    ``lower`` and ``upper`` times the initial gap, i.e. after the first 10%
    has decayed and before only 1% remains.  ``ok`` is False (and the rate
    NaN) when fewer than ``min_samples`` samples fall in the window.

    Parameters
    ----------
    trace : array_like, shape (k, 2)
        ``(tau, energy)`` pairs.
    E_final : float, optional
        Limit energy; defaults to the last trace value.
    """
    trace = np.asarray(trace, dtype=float)
    tau, E = trace[:, 0], trace[:, 1]
    if E_final is None:
        E_final = E[-1]
    gap = E - E_final
    gap0 = gap[0]
    if not gap0 > 0:
        return DecayFit(math.nan, math.nan, math.nan, 0, False)
    # stop the window at the first sample below the lower bound
    below = np.nonzero(gap < lower * gap0)[0]
    stop = below[0] if below.size else gap.size
    idx = np.arange(stop)
    idx = idx[(gap[idx] <= upper * gap0) & (gap[idx] > 0)]
    if idx.size < min_samples:
        return DecayFit(math.nan, math.nan, math.nan, int(idx.size), False)
    x, y = tau[idx], np.log(gap[idx])
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-coef[1]), float(coef[0]), r2, int(idx.size), True)


# -- problem construction ---------------------------------------------------

def _chart_point(cfg: RunConfig, pt, R: Optional[float]):
    """Map a configured point to chart coordinates (arc units on the sphere)."""
    pt = np.asarray(pt, dtype=float)
    if cfg.sweep is not None and cfg.sweep.endpoint_units == "arc":
        # (u, v) are arc lengths from the equator point theta=pi/2, phi=0
        return np.array([0.5 * np.pi + pt[0] / R, pt[1] / R])
    return pt


def pde_problem(cfg: RunConfig, manifold=None, p=None, q=None, alpha=None, init=None,
                R: Optional[float] = None) -> HeatFlowProblem:
    """HeatFlowProblem from a run config, with optional overrides."""
    if R is None:
        R = cfg.manifold.get("parameters", {}).get("R", 1.0)
    manifold = manifold if manifold is not None else cfg.build_manifold()
    p = _chart_point(cfg, cfg.p if p is None else p, R)
    q = _chart_point(cfg, cfg.q if q is None else q, R)
    st = cfg.pde
    if init is None:
        init = _initial(cfg, p, q, R)
    return HeatFlowProblem(manifold, p, q, D=st.D, alpha=alpha or st.alpha, init=init,
                           tol_converge=st.tol_converge, dtau=st.dtau, integrator=st.integrator,
                           atol=st.atol, max_tau=st.max_tau, max_wall_time=st.max_wall_time)


def _initial(cfg: RunConfig, p, q, R):
    spec = cfg.init
    if spec.kind == "waypoints":
        return [_chart_point(cfg, w, R) for w in spec.waypoints]
    if spec.kind == "sine":
        s = cgl_nodes(cfg.pde.D).nodes
        bump = spec.amplitude * np.sin(spec.mode * np.pi * s)
        X = p[:, None] + np.outer(q - p, s) + bump[None, :]
        X[:, 0] = p
        X[:, -1] = q
        return X
    return "straight"


def gd_problem(cfg: RunConfig, manifold=None, p=None, q=None) -> GdProblem:
    manifold = manifold if manifold is not None else cfg.build_manifold()
    st = cfg.gd
    return GdProblem(manifold, cfg.p if p is None else p, cfg.q if q is None else q,
                     D=st.D, N=st.N, tol_grad=st.tol_grad, max_iters=st.max_iters)


def result_row(surface: str, report: SolveReport, gd_N: Optional[int] = None) -> ResultRow:
    D = report.geodesic.degree
    N = gd_N if report.method == "gd" else D + 1
    return ResultRow(surface, report.method, D, N, report.length, report.energy,
                     report.iterations, report.residual, report.wall_time_ms, report.converged)


def run_methods(cfg: RunConfig) -> List[tuple]:
    """Solve ``cfg`` with its configured method(s); returns (row, report) pairs."""
    methods = ("pde", "gd") if cfg.method == "both" else (cfg.method,)
    out = []
    for method in methods:
        try:
            if method == "pde":
                report = solve(pde_problem(cfg))
                out.append((result_row(cfg.name, report), report))
            else:
                problem = gd_problem(cfg)
                report = solve_gd(problem)
                out.append((result_row(cfg.name, report, problem.N), report))
        except ValueError as exc:
            if isinstance(exc, GeoflowError):
                raise
            raise ConfigError(f"{cfg.name}: {exc}") from None
    return out


def geodesic_document(row: ResultRow, report: SolveReport) -> dict:
    """Serializable record of a geodesic: degree and per-coordinate coefficients.

    The curve is ``c_i(s) = sum_j coefficients[i][j] * T_j(2s - 1)`` on
    ``s`` in [0, 1].
    """
    return {
        "surface": row.surface,
        "method": row.method,
        "D": row.D,
        "dim": report.geodesic.dim,
        "basis": "chebyshev_T(2s-1)",
        "domain": [0.0, 1.0],
        "coefficients": [[float(c) for c in coord] for coord in report.geodesic.coeffs],
        "length": float(report.length),
        "energy": float(report.energy),
        "converged": bool(report.converged),
    }


# -- output helpers -----------------------------------------------------------

@contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == "-":
        buf = io.StringIO()
        yield buf
        sys.stdout.write(buf.getvalue())
        sys.stdout.flush()
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _write_csv(path: Optional[str], columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(r)


def _sibling(path: Optional[str], suffix: str, fallback: str) -> Optional[str]:
    if path is None or path == "-":
        return fallback
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- verbs --------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, out: Optional[str]) -> int:
    results = run_methods(cfg)
    _write_csv(out, RESULT_COLUMNS, (row.as_list() for row, _ in results))
    for row, report in results:
        gpath = _sibling(out, f".{row.surface}.{row.method}.json",
                         f"{row.surface}.{row.method}.json")
        with open(gpath, "w", encoding="utf-8") as fh:
            json.dump(geodesic_document(row, report), fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, out: Optional[str], eggbox: bool = False) -> int:
    surfaces = cfg.surfaces if cfg.surfaces else ((cfg,) if cfg.manifold else ())
    rows = []
    failed = False
    for surf in surfaces:
        if surf.opt_in and not eggbox:
            continue
        methods = ("pde", "gd") if surf.method == "both" else (surf.method,)
        for method in methods:
            sub = replace(surf, method=method)
            D = sub.pde.D if method == "pde" else sub.gd.D
            N = D + 1 if method == "pde" else (sub.gd.N or sub.gd.D + 4)
            try:
                (row, _), = run_methods(sub)
                rows.append(row.as_list() + [""])
            except ConfigError:
                raise
            except GeoflowError as exc:
                failed = True
                _log(f"bench: {surf.name}/{method} failed: {exc}")
                rows.append([surf.name, method, D, N, "", "", "", "", "", "false", str(exc)])
    _write_csv(out, BENCH_COLUMNS, rows)
    return EXIT_SOLVER if failed else EXIT_OK


def _require_sweep(cfg: RunConfig, parameter: str):
    if cfg.sweep is None or cfg.sweep.parameter != parameter:
        raise ConfigError(f"{cfg.name}: this command needs a [sweep] table with parameter = "
                          f"{parameter!r}")
    return cfg.sweep.values


def sweep_alpha(cfg: RunConfig):
    """Energy traces and fitted decay rates for each alpha in the sweep."""
    values = _require_sweep(cfg, "alpha")
    manifold = cfg.build_manifold()
    results = []
    for alpha in values:
        report = solve(pde_problem(cfg, manifold=manifold, alpha=alpha))
        results.append((alpha, report, fit_decay_rate(report.energy_trace)))
    return results


def sweep_radius(cfg: RunConfig):
    """Fitted decay rate per sphere radius at the configured alpha."""
    values = _require_sweep(cfg, "R")
    if cfg.manifold.get("name") != "sphere":
        raise ConfigError(f"{cfg.name}: sweep-radius needs a sphere manifold")
    results = []
    for R in values:
        report = solve(pde_problem(cfg, manifold=cfg.build_manifold(R=R), R=R))
        results.append((R, report, fit_decay_rate(report.energy_trace)))
    return results


def cmd_sweep_alpha(cfg: RunConfig, out: Optional[str]) -> int:
    results = sweep_alpha(cfg)
    trace_rows = [[_fmt(a), _fmt(t), _fmt(e)] for a, rep, _ in results for t, e in rep.energy_trace]
    _write_csv(out, TRACE_COLUMNS, trace_rows)
    rate_rows = [[_fmt(a), _fmt(f.rate), _fmt(f.r_squared), f.samples, _fmt_bool(f.ok)]
                 for a, _, f in results]
    _write_csv(_sibling(out, ".rates.csv", "sweep_alpha.rates.csv"), ALPHA_RATE_COLUMNS, rate_rows)
    for a, _, f in results:
        flag = "" if f.ok else " (fit skipped: too few samples)"
        _log(f"alpha={a:g}: rate={f.rate:.6g} r2={f.r_squared:.6f} n={f.samples}{flag}")
    return EXIT_OK


def cmd_sweep_radius(cfg: RunConfig, out: Optional[str]) -> int:
    results = sweep_radius(cfg)
    rows = [[_fmt(R), _fmt(f.rate), _fmt(f.r_squared), f.samples, _fmt_bool(f.ok),
             _fmt(rep.length)] for R, rep, f in results]
    _write_csv(out, RADIUS_COLUMNS, rows)
    trace_rows = [[_fmt(R), _fmt(t), _fmt(e)] for R, rep, _ in results for t, e in rep.energy_trace]
    _write_csv(_sibling(out, ".traces.csv", "sweep_radius.traces.csv"), RADIUS_TRACE_COLUMNS,
               trace_rows)
    ordered = sorted(((R, f.rate) for R, _, f in results), key=lambda x: -x[0])
    rates = [r for _, r in ordered]
    decreasing = all(b < a for a, b in zip(rates, rates[1:]))
    _log("rates strictly decreasing as R shrinks: " + ("yes" if decreasing else "no"))
    return EXIT_OK


def schedule_starts(cfg: RunConfig, seed: int) -> List[np.ndarray]:
    sched = cfg.schedule
    if sched is None:
        raise ConfigError(f"{cfg.name}: repeat needs a [schedule] table")
    starts = [np.asarray(s, dtype=float) for s in sched.starts]
    if sched.random:
        rng = np.random.default_rng(seed)
        q = np.asarray(cfg.q, dtype=float)
        starts += list(q + rng.uniform(-sched.spread, sched.spread, size=(sched.random, q.size)))
    return starts


def repeated_solve(cfg: RunConfig, seed: int = 0):
    """Solve once per scheduled start point, warm-starting from the last geodesic.

    Returns a list of ``(start, report_or_None, error_message)``.
    """
    manifold = cfg.build_manifold()
    previous = None
    out = []
    for start in schedule_starts(cfg, seed):
        init = previous if (cfg.schedule.warm_start and previous is not None) else None
        try:
            problem = pde_problem(cfg, manifold=manifold, p=start, init=init)
            report = solve(problem)
        except ConfigError:
            raise
        except GeoflowError as exc:
            out.append((start, None, str(exc)))
            previous = None
            continue
        except ValueError as exc:
            raise ConfigError(f"{cfg.name}: {exc}") from None
        out.append((start, report, ""))
        previous = report.nodes
    return out


def cmd_repeat(cfg: RunConfig, out: Optional[str], seed: int = 0) -> int:
    results = repeated_solve(cfg, seed)
    rows = []
    for k, (start, rep, err) in enumerate(results):
        pt = " ".join(_fmt(x) for x in start)
        if rep is None:
            rows.append([k, pt, "", "", "", "", "", "false", err])
        else:
            rows.append([k, pt, _fmt(rep.length), _fmt(rep.energy), rep.iterations,
                         _fmt(rep.residual), f"{rep.wall_time_ms:.3f}",
                         _fmt_bool(rep.converged), ""])
    _write_csv(out, REPEAT_COLUMNS, rows)
    return EXIT_SOLVER if any(rep is None for _, rep, _ in results) else EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoflow",
        description="Geodesics on Riemannian manifolds by geometric heat flow.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve one boundary value problem",
        "bench": "run the surface benchmark table",
        "sweep-alpha": "energy decay rates for several flow gains",
        "sweep-radius": "energy decay rates for spheres of several radii",
        "repeat": "sequential warm-started solves along a start-point schedule",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", metavar="PATH", default=DEFAULT_PRESETS[name],
                       help=f"TOML config file or preset:NAME (default {DEFAULT_PRESETS[name]})")
        p.add_argument("--out", metavar="PATH", default=None,
                       help="CSV output path (default: config 'output' or stdout)")
        p.add_argument("--method", choices=("pde", "gd", "both"), default=None,
                       help="override the configured method")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--fixed-step", metavar="DT", type=float, default=None,
                       help="use fixed-step RK4 with this step instead of adaptive RK45")
        if name == "bench":
            p.add_argument("--eggbox", action="store_true",
                           help="include the long-running egg box surface")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.config)
        if args.method is not None:
            cfg = cfg.with_method(args.method)
        if args.fixed_step is not None:
            cfg = cfg.with_fixed_step(args.fixed_step)
        seed = cfg.seed if args.seed is None else args.seed
        out = args.out if args.out is not None else cfg.output
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "bench":
            return cmd_bench(cfg, out, eggbox=args.eggbox)
        if args.command == "sweep-alpha":
            return cmd_sweep_alpha(cfg, out)
        if args.command == "sweep-radius":
            return cmd_sweep_radius(cfg, out)
        return cmd_repeat(cfg, out, seed)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except GeoflowError as exc:
        _log(f"solver error: {type(exc).__name__}: {exc}")
        return EXIT_SOLVER
    except OSError as exc:
        _log(f"i/o error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
