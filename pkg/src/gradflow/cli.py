"""Command-line front door.

Verbs:
    run        one simulation from a config file
    converge   time-step ladder study wrapping the convergence harness
    compare    the same config under several schemes
    selfcheck  fast oracle and invariant sweep

Exit codes: 0 ok, 2 config error, 3 assertion/selfcheck failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .diagnostics import convergence_study, dense_oracle_step
from .ics import make_initial_condition
from .models import build_model
from .outputs import write_manifest
from .runner import describe_version, run_experiment
from .schemes import EnergyLawError, SchemeError, initial_state, predictor_pair
from .spectral import make_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSERTION = 3
EXIT_IO = 4


def _load_config(path: str, seed: int | None, no_assert: bool) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _IOFailure(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    if no_assert:
        cfg = dataclasses.replace(cfg, assertions=False)
    return cfg


class _IOFailure(RuntimeError):
    pass


def _cmd_run(args) -> int:
    cfg = _load_config(args.config, args.seed, args.no_assert)
    run_experiment(cfg, args.out, basename=args.name)
    return EXIT_OK


def _cmd_converge(args) -> int:
    cfg = _load_config(args.config, args.seed, args.no_assert)
    dt_list = [float(part) for part in args.dt_ladder.split(",") if part.strip()]
    grid = make_grid(cfg.dims, cfg.extents)
    model = build_model(cfg.model, cfg.model_params, grid)
    phi0 = make_initial_condition(cfg.ic, cfg.ic_params, grid, cfg.seed)
    table = convergence_study(
        phi0, model, cfg.t_final, dt_list, args.reference_dt, cfg.scheme,
        cfg.factor, cfg.c_sav, check=cfg.assertions,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["dt,error,rate"]
    for i, (dt, err) in enumerate(zip(table.dts, table.errors)):
        rate = repr(table.rates[i - 1]) if i > 0 else ""
        lines.append(f"{dt!r},{err!r},{rate}")
    (out / f"{args.name}_convergence.csv").write_text("\n".join(lines) + "\n",
                                                      encoding="utf-8")
    items = cfg.manifest_items()
    items.append(("dt_ladder", args.dt_ladder))
    items.append(("reference_dt", repr(args.reference_dt)))
    items.append(("version", describe_version()))
    write_manifest(out / f"{args.name}_convergence.manifest", items)
    for i, dt in enumerate(table.dts):
        rate = f"{table.rates[i - 1]:.4f}" if i > 0 else "  --  "
        print(f"dt={dt:<12g} error={table.errors[i]:.6e} rate={rate}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _load_config(args.config, args.seed, args.no_assert)
    for scheme in (part.strip() for part in args.schemes.split(",")):
        if not scheme:
            continue
        leg = dataclasses.replace(cfg, scheme=scheme)
        run_experiment(leg, args.out, basename=f"{args.name}_{scheme}")
        print(f"{scheme}: done")
    return EXIT_OK


def _cmd_selfcheck(args) -> int:
    failures = []

    def check(label: str, ok: bool) -> None:
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
        if not ok:
            failures.append(label)

    from .factors import AffineFactor, QuadraticCoeffs, solve_zero_factor
    from .relaxation import RelaxationInputs, choose_relaxation_bdf2, choose_relaxation_cn
    from .spectral import Field, transform_roundtrip

    rng = np.random.default_rng(7)
    grid = make_grid([16, 16], [6.283185307179586] * 2)
    f = Field(grid, rng.standard_normal(grid.dims))
    check(
        "transform round-trip",
        float(np.abs(transform_roundtrip(f).values - f.values).max())
        <= 1e-13 * float(np.abs(f.values).max()),
    )
    check(
        "relaxation tables",
        choose_relaxation_cn(RelaxationInputs(3.0, 5.0, 4.0)) == (0.0, 0.5)
        and choose_relaxation_cn(RelaxationInputs(3.0, 5.0, 0.5)) == (0.75, 1.0)
        and choose_relaxation_bdf2(RelaxationInputs(3.0, 5.0, 6.0)) == (0.0, 1.0 / 3.0),
    )
    u, p, branch = solve_zero_factor(
        QuadraticCoeffs(2.0, 5.0, 2.0), AffineFactor(1.0, 0.0), 1.0, 3.0, 2.0, 1
    )
    check("quadratic root selection", branch == "quadratic" and abs(p + 0.5) < 1e-12)

    for model_name, params in (
        ("allen_cahn", {"epsilon": 0.4, "mobility": 1.0}),
        ("cahn_hilliard_beta", {"epsilon": 0.4, "mobility": 0.5, "beta": 2.0}),
    ):
        small = make_grid([8, 8], [6.283185307179586] * 2)
        model = build_model(model_name, params, small)
        phi0 = Field(small, 0.1 * rng.standard_normal(small.dims))
        state = initial_state(phi0, model)
        bar, q, _ = predictor_pair(state, model, 0.01, "cn")
        dbar, dq = dense_oracle_step(state, model, 0.01, "cn")
        err = max(
            float(np.abs(bar.values - dbar.values).max()),
            float(np.abs(q.values - dq.values).max()),
        )
        check(f"dense oracle ({model_name})", err <= 1e-12)

    if failures:
        print(f"{len(failures)} selfcheck(s) failed", file=sys.stderr)
        return EXIT_ASSERTION
    print("all selfchecks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to a run config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--no-assert", action="store_true",
                       help="disable per-step energy-law assertions")
        p.add_argument("--name", default="run", help="artifact basename")

    p_run = sub.add_parser("run", help="run one simulation")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_conv = sub.add_parser("converge", help="time-step ladder study")
    common(p_conv)
    p_conv.add_argument("--dt-ladder", required=True,
                        help="comma-separated descending dt values")
    p_conv.add_argument("--reference-dt", type=float, required=True,
                        help="dt of the same-scheme reference run")
    p_conv.set_defaults(func=_cmd_converge)

    p_cmp = sub.add_parser("compare", help="run several schemes on one config")
    common(p_cmp)
    p_cmp.add_argument("--schemes", required=True,
                       help="comma-separated scheme names")
    p_cmp.set_defaults(func=_cmd_compare)

    p_self = sub.add_parser("selfcheck", help="fast oracle and invariant sweep")
    p_self.set_defaults(func=_cmd_selfcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnergyLawError, SchemeError) as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (_IOFailure, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
