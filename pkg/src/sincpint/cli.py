"""Command-line front end.

Subcommands: ``solve`` (one run, JSON summary), ``bench`` (result-table
reproduction, CSV + markdown), ``spectrum`` (eigenvalue/z-curve CSV with a
verdict line), ``condnum`` (eigenvector condition-number table).  Configs
come from ``--config`` JSON merged with per-flag overrides.

Exit codes: 0 success/converged, 2 non-convergence (solve), 1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ParameterError, SizeError
from .models import (
    error_max,
    make_allen_cahn,
    make_heat2d_const,
    make_heat2d_varying,
    make_synthetic_diagonal,
    make_wave2d,
    with_reference,
)
from .pipeline import LINEAR_POLICIES, solve_linear, solve_nonlinear
from .sinc import SincParams, build_grid, build_integration_matrix
from .speclab import condition_growth, dense_preconditioned_spectrum, omega_sweep, z_function

PROBLEMS = ("heat2d-const", "heat2d-varying", "wave2d", "allen-cahn",
            "synthetic-heat", "synthetic-wave")
NONLINEAR_POLICIES = ("none", "nkpa", "nkpa_omega")
ENV_THREADS = "SINCPINT_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """One solver run: problem, discretization, preconditioner, solver."""

    problem: str = "heat2d-const"
    n: int = 32  # per-side count for 2D problems, point count otherwise
    M: int = 16
    T: float = 2.0
    d: float = np.pi / 2
    alpha: float = 1.0
    precond: str = "p"
    omega: float = 0.01
    tol: float = 1e-10
    maxit: int = 1000
    newton_rtol: float = 1e-10
    max_newton: int = 20
    threads: int | None = None
    seed: int = 0

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if self.precond not in LINEAR_POLICIES:
            raise ConfigError(f"unknown preconditioner {self.precond!r}; choose from {LINEAR_POLICIES}")
        if self.n < 1 or self.M < 0:
            raise ConfigError("n must be >= 1 and M >= 0")
        if not (0 < self.tol < 1) or not (0 < self.newton_rtol < 1):
            raise ConfigError("tolerances must lie in (0, 1)")
        if not (0 < self.omega <= 1):
            raise ConfigError("omega must lie in (0, 1]")
        if self.maxit < 1 or self.max_newton < 1:
            raise ConfigError("iteration caps must be >= 1")
        SincParams(T=self.T, M=self.M, d=self.d, alpha=self.alpha)  # range checks
        return self


def _load_config(args) -> RunConfig:
    payload = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            payload = json.load(fh)
        unknown = set(payload) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**payload)
    for field in RunConfig.__dataclass_fields__:
        value = getattr(args, field, None)
        if value is not None:
            cfg = replace(cfg, **{field: value})
    if cfg.threads is None and os.environ.get(ENV_THREADS):
        cfg = replace(cfg, threads=int(os.environ[ENV_THREADS]))
    return cfg.validate()


def _make_model(cfg: RunConfig):
    if cfg.problem == "heat2d-const":
        return make_heat2d_const(cfg.n, cfg.T)
    if cfg.problem == "heat2d-varying":
        return make_heat2d_varying(cfg.n, cfg.T)
    if cfg.problem == "wave2d":
        return make_wave2d(cfg.n, cfg.T)
    if cfg.problem == "allen-cahn":
        return make_allen_cahn(cfg.n, cfg.T)
    rng = np.random.default_rng(cfg.seed)
    if cfg.problem == "synthetic-heat":
        return make_synthetic_diagonal(-(10.0 ** rng.uniform(-2, 3, cfg.n)))
    half = 10.0 ** rng.uniform(-1, 2, max(cfg.n // 2, 1))
    return make_synthetic_diagonal(np.concatenate([1j * half, -1j * half]))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return "nan" if np.isnan(x) else f"{x:.5e}"
    return str(x)


def _write_csv(path, header, rows, timestamp=True):
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# generated {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_markdown(path, header, rows):
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join(["---"] * len(header)) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(v) for v in row) + " |")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _grid(cfg: RunConfig, M=None):
    return build_grid(SincParams(T=cfg.T, M=cfg.M if M is None else M,
                                 d=cfg.d, alpha=cfg.alpha))


def _allen_cahn_reference(model, grid, cfg: RunConfig):
    ref_grid = build_grid(SincParams(T=cfg.T, M=2 * grid.params.M + 32,
                                     d=cfg.d, alpha=cfg.alpha))
    ref = solve_nonlinear(model, ref_grid, policy="nkpa", rtol=cfg.newton_rtol,
                          tol=cfg.tol, maxit=cfg.maxit, threads=cfg.threads)
    return with_reference(model, ref.report.solution, ref_grid)


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    model = _make_model(cfg)
    grid = _grid(cfg)
    summary = {"problem": cfg.problem, "m": grid.m, "n": model.n, "precond": cfg.precond}
    if model.q is not None:
        if cfg.precond not in NONLINEAR_POLICIES:
            raise ConfigError(f"nonlinear problems take precond from {NONLINEAR_POLICIES}")
        run = solve_nonlinear(model, grid, policy=cfg.precond, omega=cfg.omega,
                              rtol=cfg.newton_rtol, max_newton=cfg.max_newton,
                              tol=cfg.tol, maxit=cfg.maxit, threads=cfg.threads)
        mref = _allen_cahn_reference(model, grid, cfg)
        summary.update({
            "It_G": run.report.max_inner_iters,
            "It_N": run.report.newton_iters,
            "Error": error_max(run.report.solution, mref, grid),
            "converged": run.report.converged,
            "cond2V": None,
        })
    else:
        run = solve_linear(model, grid, policy=cfg.precond, omega=cfg.omega,
                           tol=cfg.tol, maxit=cfg.maxit, threads=cfg.threads)
        summary.update({
            "It_G": run.report.iterations,
            "It_N": None,
            "Error": error_max(run.report.solution, model, grid) if model.exact else None,
            "converged": run.report.converged,
            "cond2V": run.pc.cond2V if run.pc is not None else None,
        })
    summary["wall_ms"] = round(run.wall_seconds * 1000.0, 3)
    text = json.dumps(summary, indent=2, default=float) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if summary["converged"] else 2


_BENCH_TABLES = ("heat-const", "heat-varying", "wave", "wave-omega-sweep", "allen-cahn")


def _bench_linear_rows(make, cfg, ns, Ms, policies, maxit_none=200):
    rows = []
    warnings = 0
    for n in ns:
        model = make(n, cfg.T)
        for M in Ms:
            grid = _grid(cfg, M)
            for pol in policies:
                maxit = maxit_none if pol == "none" else cfg.maxit
                try:
                    run = solve_linear(model, grid, policy=pol, omega=cfg.omega,
                                       tol=cfg.tol, maxit=maxit, threads=cfg.threads)
                    err = error_max(run.report.solution, model, grid)
                    its = run.report.iterations if run.report.converged else f">{run.report.iterations}"
                    rows.append([model.n, grid.m, pol, err, its, run.wall_seconds, run.report.converged])
                    warnings += 0 if run.report.converged else 1
                except Exception as exc:  # noqa: BLE001 - sentinel cells by contract
                    rows.append([model.n, grid.m, pol, "failed", str(exc)[:40], "", False])
                    warnings += 1
    return rows, warnings


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    table, tier = args.table, args.tier
    if table not in _BENCH_TABLES:
        raise ConfigError(f"unknown bench table {table!r}; choose from {_BENCH_TABLES}")
    small = tier == "small"
    header = ["n", "m", "precond", "error", "It_G", "cpu_seconds", "converged"]
    warnings = 0

    if table == "heat-const":
        ns = [32] if small else [32, 64, 128]
        Ms = [16, 32] if small else [16, 32, 64, 128]
        rows, warnings = _bench_linear_rows(make_heat2d_const, cfg, ns, Ms, ["p", "p_omega"])
    elif table == "heat-varying":
        ns = [32] if small else [32, 64, 128]
        Ms = [16, 32] if small else [16, 32, 64, 128]
        rows, warnings = _bench_linear_rows(make_heat2d_varying, cfg, ns, Ms, ["avg", "nkpa"])
    elif table == "wave":
        ns = [32] if small else [32, 64]
        Ms = [16, 32] if small else [16, 32, 64, 128]
        policies = ["none", "p_omega"] if small else ["p_omega"]
        rows, warnings = _bench_linear_rows(make_wave2d, cfg, ns, Ms, policies)
    elif table == "wave-omega-sweep":
        omegas = [1e-3, 1e-6, 1e-9, 1e-12] if small else [1e-3, 1e-6, 1e-9, 1e-12, 1e-15]
        Ms = [16, 32] if small else [16, 32, 64, 128]
        ns = [32] if small else [32, 64, 128]
        header = ["n", "m"]
        for om in omegas:
            header += [f"error_{om:.0e}", f"itg_{om:.0e}"]
        rows = []
        for n in ns:
            model = make_wave2d(n, cfg.T)
            sweep = omega_sweep(model, Ms, omegas, T=cfg.T, tol=cfg.tol, threads=cfg.threads)
            for M in Ms:
                m = 2 * M + 1
                row = [model.n, m]
                for om in omegas:
                    cell = next(r for r in sweep if r["m"] == m and r["omega"] == om)
                    row += [cell["error"], cell["iterations"]]
                    warnings += 0 if cell.get("converged") else 1
                rows.append(row)
    else:  # allen-cahn
        ns = [256] if small else [256, 512, 1024]
        Ms = [16, 32] if small else [16, 32, 64, 128]
        header = ["n", "m", "precond", "error", "It_N", "It_G", "cpu_seconds", "converged"]
        rows = []
        for n in ns:
            model = make_allen_cahn(n, cfg.T)
            for M in Ms:
                grid = _grid(cfg, M)
                mref = _allen_cahn_reference(model, grid, cfg)
                for pol in ("nkpa", "nkpa_omega"):
                    try:
                        run = solve_nonlinear(model, grid, policy=pol, omega=cfg.omega,
                                              rtol=cfg.newton_rtol, max_newton=cfg.max_newton,
                                              tol=cfg.tol, maxit=cfg.maxit, threads=cfg.threads)
                        err = error_max(run.report.solution, mref, grid)
                        rows.append([n, grid.m, pol, err, run.report.newton_iters,
                                     run.report.max_inner_iters, run.wall_seconds,
                                     run.report.converged])
                        warnings += 0 if run.report.converged else 1
                    except Exception as exc:  # noqa: BLE001
                        rows.append([n, grid.m, pol, "failed", "", str(exc)[:40], "", False])
                        warnings += 1

    if args.no_timestamp:
        cpu_cols = [i for i, name in enumerate(header) if name == "cpu_seconds"]
        for row in rows:
            for i in cpu_cols:
                row[i] = ""
    _write_csv(args.out, header, rows, timestamp=not args.no_timestamp)
    if args.out:
        _write_markdown(os.path.splitext(args.out)[0] + ".md", header, rows)
    if warnings:
        print(f"warning: {warnings} cell(s) did not converge or failed", file=sys.stderr)
    return 0


def cmd_spectrum(args) -> int:
    cfg = _load_config(args)
    mode = args.mode
    if mode == "z-curve":
        grid = _grid(cfg)
        imat = build_integration_matrix(grid.m)
        mus = np.logspace(-6, 12, 200)
        zs = np.array([z_function(mu, grid, imat) for mu in mus])
        rows = [[mu, z.real] for mu, z in zip(mus, zs)]
        _write_csv(args.out, ["mu", "z"], rows, timestamp=not args.no_timestamp)
        ok = bool(np.all(zs.real >= 0) and np.all(zs.real < 2)
                  and np.max(np.abs(zs.imag)) <= 1e-10)
        print(f"verdict {'PASS' if ok else 'FAIL'}: z(mu) in [0,2) on {len(mus)} samples")
        return 0

    if mode == "annulus-check" and cfg.problem not in ("wave2d", "synthetic-wave"):
        cfg = replace(cfg, problem="synthetic-wave")
    model = _make_model(cfg)
    grid = _grid(cfg)
    if mode == "operator":
        from .pipeline import build_system

        sys_ = build_system(model, grid)
        eigs = np.linalg.eigvals(sys_.dense())
        rows = [[e.real, e.imag] for e in np.sort_complex(eigs)]
        _write_csv(args.out, ["re", "im"], rows, timestamp=not args.no_timestamp)
        print(f"verdict PASS: {len(eigs)} eigenvalues (no bound checked)")
        return 0

    omega = cfg.omega if cfg.precond.endswith("_omega") else 1.0
    if mode == "annulus-check":
        omega = cfg.omega
    rep = dense_preconditioned_spectrum(model, grid, omega=omega)
    rows = [[e.real, e.imag] for e in np.sort_complex(rep.eigenvalues)]
    _write_csv(args.out, ["re", "im"], rows, timestamp=not args.no_timestamp)
    verdict = "PASS" if rep.passed else "FAIL"
    print(f"verdict {verdict}: kind={rep.bound_kind} unity={rep.unity_count} "
          f"violations={len(rep.bound_violations)}")
    return 0


def cmd_condnum(args) -> int:
    Ms = [int(v) for v in args.Ms.split(",")]
    omegas = [float(v) for v in args.omegas.split(",")]
    if any(M > args.max_M for M in Ms):
        raise ConfigError(f"M values capped at {args.max_M} (override with --max-M)")
    rows = condition_growth(Ms, omegas, T=args.T)
    out = [[r["M"], r["omega"], r["cond2V"], r["cond2U"]] for r in rows]
    _write_csv(args.out, ["M", "omega", "cond2V", "cond2U"], out,
               timestamp=not args.no_timestamp)
    return 0


def _add_config_flags(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--problem", help=f"one of {', '.join(PROBLEMS)}")
    p.add_argument("--n", type=int, help="spatial size (per side for 2D problems)")
    p.add_argument("--M", type=int, help="collocation half-width (m = 2M+1)")
    p.add_argument("--T", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--precond", help=f"one of {', '.join(LINEAR_POLICIES)}")
    p.add_argument("--omega", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--maxit", type=int)
    p.add_argument("--newton-rtol", dest="newton_rtol", type=float)
    p.add_argument("--max-newton", dest="max_newton", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--no-timestamp", action="store_true",
                   help="suppress the timestamp header and timing columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sincpint",
        description="Parallel-in-time preconditioned solvers for collocated "
                    "all-at-once systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one problem and write a JSON summary")
    _add_config_flags(p)

    p = sub.add_parser("bench", help="reproduce a result table (CSV + markdown)")
    p.add_argument("table", choices=_BENCH_TABLES)
    p.add_argument("--tier", choices=("small", "full"), default="small")
    _add_config_flags(p)

    p = sub.add_parser("spectrum", help="eigenvalue / z-curve CSV with verdict")
    p.add_argument("--mode", choices=("operator", "preconditioned", "z-curve", "annulus-check"),
                   default="preconditioned")
    _add_config_flags(p)

    p = sub.add_parser("condnum", help="eigenvector condition-number table")
    p.add_argument("--Ms", default="16,32,64,128")
    p.add_argument("--omegas", default="1,0.01,1e-6")
    p.add_argument("--T", type=float, default=2.0)
    p.add_argument("--max-M", dest="max_M", type=int, default=256)
    p.add_argument("--out")
    p.add_argument("--no-timestamp", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"solve": cmd_solve, "bench": cmd_bench,
                "spectrum": cmd_spectrum, "condnum": cmd_condnum}
    try:
        return handlers[args.command](args)
    except (ConfigError, ParameterError, SizeError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
