"""Command-line entry points.

Subcommands: generate (scenario JSON), localize (scenario JSON ->
coords JSON + RMS), extract (scenario -> topology JSON), experiment
(config file -> full sweep), plot (reports.csv -> SVG figures).
Exit codes: 0 success, 1 config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, IotopoError
from .harness import (
    ExperimentConfig,
    load_config,
    parse_reports_csv,
    run,
    write_figures,
)
from .radio import RadioParams, transmission_range_km
from .scenario import Deployment, generate_annulus, generate_rectangle, measure
from .sync import localize, save_localization
from .topo import extract, save_topology


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iotopo",
        description="IoT network localization and topology extraction simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a scenario JSON file")
    g.add_argument("--shape", choices=("annulus", "rectangle"), required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--inner-km", type=float, default=0.2)
    g.add_argument("--outer-km", type=float, default=1.0)
    g.add_argument("--width-km", type=float, default=4.0)
    g.add_argument("--height-km", type=float, default=4.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, default=None, help="output path (default stdout)")

    l = sub.add_parser("localize", help="measure a scenario and localize it")
    l.add_argument("--scenario", type=Path, required=True)
    l.add_argument("--range-km", type=float, default=None,
                   help="sensing range (default: radio-derived)")
    l.add_argument("--noise", type=float, default=0.0, help="distance noise factor")
    l.add_argument("--seed", type=int, default=0, help="measurement noise seed")
    l.add_argument("--out", type=Path, default=None)

    e = sub.add_parser("extract", help="extract a topology from a scenario")
    e.add_argument("--scenario", type=Path, required=True)
    e.add_argument("--algo", choices=("maxnttop", "lmst", "bruteforce"), default="maxnttop")
    e.add_argument("--config", type=Path, default=None,
                   help="experiment config supplying radio params")
    e.add_argument("--beta-db", type=float, default=None, help="override SNR threshold")
    e.add_argument("--range-km", type=float, default=None)
    e.add_argument("--noise", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", type=Path, default=None)

    x = sub.add_parser("experiment", help="run a full seeded sweep from a config file")
    x.add_argument("--config", type=Path, required=True)
    x.add_argument("--out", type=Path, default=None, help="override output directory")

    p = sub.add_parser("plot", help="render SVG figures from a reports.csv")
    p.add_argument("--csv", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    return parser


def _cmd_generate(args) -> int:
    if args.shape == "annulus":
        dep = generate_annulus(args.n, args.inner_km, args.outer_km, args.seed)
    else:
        dep = generate_rectangle(args.n, args.width_km, args.height_km, args.seed)
    text = json.dumps(dep.to_json(), indent=1)
    if args.out:
        args.out.write_text(text + "\n")
    else:
        print(text)
    return 0


def _load_scenario(path: Path) -> Deployment:
    with open(path) as fh:
        return Deployment.from_json(json.load(fh))


def _cmd_localize(args) -> int:
    dep = _load_scenario(args.scenario)
    params = RadioParams()
    rng_km = args.range_km if args.range_km is not None else transmission_range_km(params)
    mg = measure(dep, rng_km, args.noise, args.seed)
    result = localize(mg, truth=dep.positions)
    if args.out:
        save_localization(result, args.out)
    else:
        print(json.dumps(result.to_json(), indent=1))
    if result.rms_km is not None:
        print(f"rms_km={result.rms_km:.9e}", file=sys.stderr)
    return 0


def _cmd_extract(args) -> int:
    dep = _load_scenario(args.scenario)
    if args.config:
        cfg = load_config(args.config)
        params = cfg.radio
        rng_km = args.range_km if args.range_km is not None else cfg.effective_range_km()
        kw = {"eps": cfg.eps_db, "max_iters": cfg.max_iters,
              "power_step_fraction": cfg.power_step_fraction}
        step_db = cfg.step_db
    else:
        params = RadioParams()
        rng_km = args.range_km if args.range_km is not None else transmission_range_km(params)
        kw = {}
        step_db = 1.0
    if args.beta_db is not None:
        params = params.replace(beta_db=args.beta_db)
    mg = measure(dep, rng_km, args.noise, args.seed)
    if args.algo == "bruteforce":
        topo = extract(args.algo, mg, params, step_db=step_db)
    elif args.algo == "maxnttop":
        topo = extract(args.algo, mg, params, **kw)
    else:
        topo = extract(args.algo, mg, params)
    if args.out:
        save_topology(topo, args.out)
    else:
        print(json.dumps(topo.to_json(), indent=1))
    return 0


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg = ExperimentConfig(**{**cfg.__dict__, "outdir": str(args.out)})
    reports = run(cfg)
    print(f"wrote {len(reports)} report rows to {cfg.outdir}", file=sys.stderr)
    return 0


def _cmd_plot(args) -> int:
    reports = parse_reports_csv(args.csv)
    args.out.mkdir(parents=True, exist_ok=True)
    written = write_figures(reports, args.out)
    for p in written:
        print(p, file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "localize": _cmd_localize,
        "extract": _cmd_extract,
        "experiment": _cmd_experiment,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (IotopoError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
