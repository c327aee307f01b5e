"""Command-line interface: seeded experiment runs, verification, goldens.

Subcommands:
  run     simulate every configured seed and write trace files + manifest
  verify  run the offline verification battery; nonzero exit on any failure
  golden  regenerate the golden saddle-solution file for a config

Exit codes: 0 success, 2 config error, 3 run failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernel
from .analysis import verification_battery
from .config import RunConfig, load_config
from .controller import run
from .errors import CertlqError, ConfigError
from .metrics import benchmark_cost
from .riccati import solve_gare
from .trace import RunTrace, write_manifest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN = 3
EXIT_VERIFY = 4


def run_experiment(cfg: RunConfig) -> list[RunTrace]:
    """Run every seed in the config, writing trace files and a manifest.

    Seeds are independent (each owns its generator and state), so failures
    are recorded per seed without aborting the rest.
    """
    out_dir = Path(cfg.output_dir)
    chash = cfg.config_hash()
    traces: list[RunTrace] = []
    statuses: dict[str, str] = {}
    for seed in cfg.seeds:
        try:
            trace = run(cfg.spec, cfg, seed)
        except CertlqError as e:
            statuses[f"seed_{seed}"] = f"failed: {e}"
            partial = getattr(e, "trace", None)
            if partial is not None:
                partial.config_hash = chash
                partial.code_version = __version__
                partial.write_csv(out_dir)
            continue
        trace.config_hash = chash
        trace.code_version = __version__
        trace.write_csv(out_dir)
        statuses[f"seed_{seed}"] = f"ok steps={trace.n_steps} episodes={trace.n_episodes}"
        traces.append(trace)
    entries = {
        "schema_version": 1,
        "package_version": __version__,
        "config_hash": chash,
        "rng": "numpy-PCG64 (default_rng per seed)",
        "backend": kernel.BACKEND,
        "horizon": cfg.horizon,
        "seeds": ",".join(str(s) for s in cfg.seeds),
    }
    entries.update(statuses)
    write_manifest(out_dir, entries)
    return traces


def verify(cfg: RunConfig, out_dir: Path | None = None) -> int:
    """Run the verification battery; write a report and return an exit code."""
    out_dir = Path(cfg.output_dir) if out_dir is None else Path(out_dir)
    results = verification_battery(
        cfg.spec.truth, cfg.spec.cost, cfg.spec.noise, cfg.margins, cfg.solver
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "verify_report.csv"
    lines = ["name,value,threshold,passed,note"]
    failed = 0
    for r in results:
        lines.append(f"{r.name},{r.value:.17g},\"{r.threshold}\",{int(r.passed)},\"{r.note}\"")
        marker = "PASS" if r.passed else "FAIL"
        print(f"[{marker}] {r.name}: value={r.value:.6g} threshold={r.threshold}"
              + (f"  ({r.note})" if r.note else ""))
        failed += 0 if r.passed else 1
    report.write_text("\n".join(lines) + "\n")
    print(f"report written to {report} ({len(results) - failed}/{len(results)} passed)")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def write_golden(cfg: RunConfig, out_path: Path) -> Path:
    """Solve the configured game at its true parameters and freeze the result.

    The file records the saddle solution, gains, margins and benchmark cost,
    plus the solver settings that produced them.
    """
    sol = solve_gare(cfg.spec.truth, cfg.spec.cost, cfg.solver)
    payload = {
        "provenance": {
            "generator": "certlq golden",
            "package_version": __version__,
            "config_hash": cfg.config_hash(),
            "solver": {"tol": cfg.solver.tol, "max_iter": cfg.solver.max_iter,
                       "mu_floor": cfg.solver.mu_floor},
            "note": "fixed-point GARE solve at the true parameters; residual and "
                    "stationarity identities certified by the verification battery",
        },
        "P": sol.P.tolist(),
        "K": sol.K.tolist(),
        "L": sol.L.tolist(),
        "margin": sol.margin,
        "rho_cl": sol.rho_cl,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "j_star": benchmark_cost(sol, cfg.spec.noise),
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(payload, indent=2) + "\n")
    return out_path


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True,
                   help="path to a JSON config, or a shipped name (e.g. 'example')")
    p.add_argument("--seeds", default=None,
                   help="comma-separated seed list overriding the config")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--horizon-override", type=int, default=None,
                   help="horizon override (steps)")


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    seeds = None
    if args.seeds is not None:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
        except ValueError:
            raise ConfigError("--seeds must be a comma-separated integer list", "seeds") from None
        if not seeds:
            raise ConfigError("--seeds must be nonempty", "seeds")
    out = args.out or os.environ.get("CERTLQ_OUT")
    return cfg.with_overrides(seeds=seeds, horizon=args.horizon_override, output_dir=out)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="certlq",
        description="Certified online learning for zero-sum linear-quadratic games",
    )
    parser.add_argument("--version", action="version", version=f"certlq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("run", "simulate all configured seeds and write traces"),
        ("verify", "run the offline verification battery"),
        ("golden", "regenerate golden saddle-solution values"),
    ):
        p = sub.add_parser(name, help=desc)
        _add_common(p)
        if name == "golden":
            p.add_argument("--golden-out", default=None,
                           help="output file (default: <out>/golden.json)")
    args = parser.parse_args(argv)

    try:
        cfg = _load(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            traces = run_experiment(cfg)
            print(f"{len(traces)}/{len(cfg.seeds)} seeds succeeded; "
                  f"traces in {cfg.output_dir} (backend: {kernel.BACKEND})")
            if traces:
                final = np.mean([t.normalized_regret[-1] for t in traces])
                print(f"mean final normalized regret: {final:.6g}")
            return EXIT_OK if len(traces) == len(cfg.seeds) else EXIT_RUN
        if args.command == "verify":
            return verify(cfg)
        out_file = args.golden_out or (Path(cfg.output_dir) / "golden.json")
        path = write_golden(cfg, Path(out_file))
        print(f"golden values written to {path}")
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CertlqError as e:
        print(f"run failure: {e}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
