"""Experiment harness: config parsing, seeded sweep execution, CSV and
SVG emission.

A config describes one scenario family (shape, node count, seeds), the
radio parameters, the algorithms to run, and an optional SNR-threshold
sweep.  Every (seed, algorithm, sweep point) job is independent; jobs
run in a process pool capped by the IOTOPO_WORKERS environment
variable, and results are collected in a deterministic order so that
identical configs produce byte-identical reports.csv (wall-clock
timings are therefore kept out of reports.csv and written to the
timings.csv sidecar instead).
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import svg
from .errors import ConfigError, IotopoError
from .metrics import RunReport, aggregate
from .radio import RadioParams, transmission_range_km
from .scenario import generate_annulus, generate_rectangle, measure
from .sync import localize
from .topo import avg_node_degree, extract, network_throughput

REPORT_HEADER = (
    "scenario_id,seed,algo,beta_db,avg_degree,throughput_total_bps,"
    "throughput_per_link_bps,rms_km,iterations,wall_ms"
)

_SCENARIO_KEYS = {
    "shape", "n", "inner_km", "outer_km", "width_km", "height_km",
    "seeds", "sensing_range_km", "noise_factor", "noise_seed",
}
_RUN_KEYS = {
    "algorithms", "eps_db", "max_iters", "step_db", "power_step_fraction",
    "initial_patches", "outdir", "dump_topologies",
}
_SWEEP_KEYS = {"beta_start_db", "beta_stop_db", "beta_step_db"}
_ALGOS = ("maxnttop", "bruteforce", "lmst")


@dataclass(frozen=True)
class ExperimentConfig:
    shape: str
    n: int
    seeds: Tuple[int, ...]
    inner_km: float = 0.2
    outer_km: float = 1.0
    width_km: float = 4.0
    height_km: float = 4.0
    sensing_range_km: Optional[float] = None
    noise_factor: float = 0.0
    noise_seed: int = 0
    radio: RadioParams = field(default_factory=RadioParams)
    algorithms: Tuple[str, ...] = _ALGOS
    eps_db: float = 0.1
    max_iters: int = 50
    step_db: float = 1.0
    power_step_fraction: float = 0.7
    initial_patches: str = "localization"
    sweep: Optional[Tuple[float, float, float]] = None
    outdir: str = "out"
    dump_topologies: bool = True

    def scenario_id(self, seed: int) -> str:
        return f"{self.shape}-n{self.n}-s{seed}"

    def beta_points(self) -> List[float]:
        if self.sweep is None:
            return [self.radio.beta_db]
        start, stop, step = self.sweep
        points = []
        b = start
        while b <= stop + 1e-9:
            points.append(round(b, 9))
            b += step
        return points

    def effective_range_km(self) -> float:
        if self.sensing_range_km is not None:
            return self.sensing_range_km
        return transmission_range_km(self.radio)


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def config_from_dict(raw: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a parsed config mapping; messages name the bad field."""
    for section in raw:
        _require(section in ("scenario", "radio", "run", "sweep"),
                 f"unknown config section [{section}]")
    scen = raw.get("scenario", {})
    run = raw.get("run", {})
    sweep = raw.get("sweep")
    for k in scen:
        _require(k in _SCENARIO_KEYS, f"unknown key scenario.{k}")
    for k in run:
        _require(k in _RUN_KEYS, f"unknown key run.{k}")
    _require("shape" in scen, "missing required key scenario.shape")
    _require(scen["shape"] in ("annulus", "rectangle"),
             f"scenario.shape must be annulus or rectangle, got {scen['shape']!r}")
    _require("n" in scen and int(scen["n"]) >= 1, "scenario.n must be >= 1")
    seeds = scen.get("seeds", [])
    _require(isinstance(seeds, (list, tuple)) and len(seeds) > 0,
             "scenario.seeds must be a nonempty list")
    try:
        radio = RadioParams(**raw.get("radio", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [radio] section: {exc}") from exc
    algos = tuple(run.get("algorithms", list(_ALGOS)))
    for a in algos:
        _require(a in _ALGOS, f"run.algorithms entry {a!r} not in {_ALGOS}")
    sweep_tuple = None
    if sweep is not None:
        for k in sweep:
            _require(k in _SWEEP_KEYS, f"unknown key sweep.{k}")
        _require(all(k in sweep for k in _SWEEP_KEYS),
                 "sweep needs beta_start_db, beta_stop_db, beta_step_db")
        _require(sweep["beta_step_db"] > 0, "sweep.beta_step_db must be > 0")
        sweep_tuple = (
            float(sweep["beta_start_db"]),
            float(sweep["beta_stop_db"]),
            float(sweep["beta_step_db"]),
        )
    initial = run.get("initial_patches", "localization")
    _require(initial in ("localization", "singletons"),
             "run.initial_patches must be localization or singletons")
    outdir = run.get("outdir", "out")
    if base_dir is not None and not os.path.isabs(outdir):
        outdir = str(base_dir / outdir)
    return ExperimentConfig(
        shape=scen["shape"],
        n=int(scen["n"]),
        seeds=tuple(int(s) for s in seeds),
        inner_km=float(scen.get("inner_km", 0.2)),
        outer_km=float(scen.get("outer_km", 1.0)),
        width_km=float(scen.get("width_km", 4.0)),
        height_km=float(scen.get("height_km", 4.0)),
        sensing_range_km=(
            float(scen["sensing_range_km"]) if "sensing_range_km" in scen else None
        ),
        noise_factor=float(scen.get("noise_factor", 0.0)),
        noise_seed=int(scen.get("noise_seed", 0)),
        radio=radio,
        algorithms=algos,
        eps_db=float(run.get("eps_db", 0.1)),
        max_iters=int(run.get("max_iters", 50)),
        step_db=float(run.get("step_db", 1.0)),
        power_step_fraction=float(run.get("power_step_fraction", 0.7)),
        initial_patches=initial,
        sweep=sweep_tuple,
        outdir=outdir,
        dump_topologies=bool(run.get("dump_topologies", True)),
    )


def load_config(path) -> ExperimentConfig:
    """Parse a TOML or JSON experiment config file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        raw = json.loads(text)
    else:
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            raw = tomllib.loads(text)
        except Exception as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


def _generate(cfg: ExperimentConfig, seed: int):
    if cfg.shape == "annulus":
        return generate_annulus(cfg.n, cfg.inner_km, cfg.outer_km, seed)
    return generate_rectangle(cfg.n, cfg.width_km, cfg.height_km, seed)


def _run_seed(cfg: ExperimentConfig, seed: int) -> dict:
    """All algorithms x sweep points for one seed (worker job)."""
    out = {"seed": seed, "rows": [], "topologies": [], "error": None}
    t0 = time.perf_counter()
    try:
        dep = _generate(cfg, seed)
        mg = measure(dep, cfg.effective_range_km(), cfg.noise_factor, cfg.noise_seed + seed)
        loc = localize(mg, truth=dep.positions)
        rms = loc.rms_km if loc.rms_km is not None else 0.0
        patches = None
        if cfg.initial_patches == "localization":
            patches = [p.members for p in loc.patch_set.patches]
        out["scenario_json"] = dep.to_json()
        out["localization_json"] = loc.to_json()
        loc_ms = (time.perf_counter() - t0) * 1000.0

        for beta in cfg.beta_points():
            params = cfg.radio.replace(beta_db=beta)
            for algo in cfg.algorithms:
                t1 = time.perf_counter()
                kw = {}
                if algo == "maxnttop":
                    kw = {
                        "eps": cfg.eps_db,
                        "max_iters": cfg.max_iters,
                        "initial_patches": patches,
                        "power_step_fraction": cfg.power_step_fraction,
                    }
                elif algo == "bruteforce":
                    kw = {"step_db": cfg.step_db}
                topo = extract(algo, mg, params, **kw)
                thr = network_throughput(topo, params)
                wall = (time.perf_counter() - t1) * 1000.0 + loc_ms
                out["rows"].append(
                    RunReport(
                        scenario_id=cfg.scenario_id(seed),
                        seed=seed,
                        algorithm=algo,
                        beta_db=beta,
                        avg_node_degree=avg_node_degree(topo),
                        throughput_total_bps=thr.total_bps,
                        throughput_per_link_bps=thr.per_link_bps,
                        localization_rms_km=rms,
                        iterations=topo.iterations,
                        wall_time_ms=wall,
                    )
                )
                if cfg.dump_topologies:
                    out["topologies"].append(
                        (f"topology_s{seed}_{algo}_beta{beta:g}.json", topo.to_json())
                    )
    except IotopoError as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def _format_row(r: RunReport, wall_ms: float) -> str:
    return ",".join(
        [
            r.scenario_id,
            str(r.seed),
            r.algorithm,
            f"{r.beta_db:.6g}",
            f"{r.avg_node_degree:.6f}",
            f"{r.throughput_total_bps:.6f}",
            f"{r.throughput_per_link_bps:.6f}",
            f"{r.localization_rms_km:.12e}",
            str(r.iterations),
            f"{wall_ms:.0f}",
        ]
    )


def write_reports_csv(reports: Sequence[RunReport], path, include_timings: bool = False) -> None:
    """Emit the documented report schema.

    wall_ms is written as 0 unless include_timings is set: timing is
    inherently non-deterministic and reports.csv must be byte-identical
    across reruns of the same config.
    """
    lines = [REPORT_HEADER]
    for r in reports:
        lines.append(_format_row(r, r.wall_time_ms if include_timings else 0.0))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_reports_csv(path) -> List[RunReport]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = REPORT_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ConfigError(f"bad report header {reader.fieldnames}, want {expected}")
        for rec in reader:
            rows.append(
                RunReport(
                    scenario_id=rec["scenario_id"],
                    seed=int(rec["seed"]),
                    algorithm=rec["algo"],
                    beta_db=float(rec["beta_db"]),
                    avg_node_degree=float(rec["avg_degree"]),
                    throughput_total_bps=float(rec["throughput_total_bps"]),
                    throughput_per_link_bps=float(rec["throughput_per_link_bps"]),
                    localization_rms_km=float(rec["rms_km"]),
                    iterations=int(rec["iterations"]),
                    wall_time_ms=float(rec["wall_ms"]),
                )
            )
    return rows


def write_figures(reports: Sequence[RunReport], outdir: Path) -> List[Path]:
    """Degree bar chart plus throughput-vs-threshold line charts."""
    written = []
    rows = aggregate(reports)
    betas = sorted({r.beta_db for r in reports})
    algos = sorted({r.algorithm for r in reports})

    base_beta = betas[0]
    labels, means, stds = [], [], []
    for a in algos:
        row = next(r for r in rows if r["algorithm"] == a and r["beta_db"] == base_beta)
        labels.append(a)
        means.append(row["mean_avg_node_degree"])
        stds.append(row["std_avg_node_degree"])
    p = outdir / "figure_degree.svg"
    p.write_text(svg.bar_chart(labels, means, "Average node degree", "degree", errors=stds))
    written.append(p)

    if len(betas) > 1:
        for metric, fname, ylab in (
            ("mean_throughput_per_link_bps", "figure_throughput_per_link_vs_beta.svg", "bits/s per link"),
            ("mean_throughput_total_bps", "figure_throughput_total_vs_beta.svg", "bits/s"),
        ):
            series = []
            for a in algos:
                xs = betas
                ys = [
                    next(r[metric] for r in rows if r["algorithm"] == a and r["beta_db"] == b)
                    for b in betas
                ]
                series.append((a, xs, ys))
            p = outdir / fname
            p.write_text(
                svg.line_chart(series, "Throughput vs SNR threshold", "beta (dB)", ylab)
            )
            written.append(p)
    else:
        labels, means = [], []
        for a in algos:
            row = next(r for r in rows if r["algorithm"] == a)
            labels.append(a)
            means.append(row["mean_throughput_total_bps"])
        p = outdir / "figure_throughput.svg"
        p.write_text(svg.bar_chart(labels, means, "Network throughput", "bits/s"))
        written.append(p)
    return written


def run(cfg: ExperimentConfig) -> List[RunReport]:
    """Execute the full sweep and write all artifacts under cfg.outdir."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    workers = int(os.environ.get("IOTOPO_WORKERS", "0")) or min(
        len(cfg.seeds), os.cpu_count() or 1
    )
    jobs = list(cfg.seeds)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed, [cfg] * len(jobs), jobs))
    else:
        results = [_run_seed(cfg, seed) for seed in jobs]

    results.sort(key=lambda r: r["seed"])
    reports: List[RunReport] = []
    failures = []
    for res in results:
        if res["error"]:
            failures.append((cfg.scenario_id(res["seed"]), res["seed"], res["error"]))
            continue
        sid = cfg.scenario_id(res["seed"])
        with open(outdir / f"scenario_s{res['seed']}.json", "w") as fh:
            json.dump(res["scenario_json"], fh, indent=1)
        with open(outdir / f"localization_s{res['seed']}.json", "w") as fh:
            json.dump(res["localization_json"], fh, indent=1)
        for fname, obj in res["topologies"]:
            with open(outdir / fname, "w") as fh:
                json.dump(obj, fh, indent=1)
        reports.extend(res["rows"])

    order = {a: k for k, a in enumerate(cfg.algorithms)}
    reports.sort(key=lambda r: (r.seed, r.beta_db, order[r.algorithm]))
    write_reports_csv(reports, outdir / "reports.csv")
    write_reports_csv(reports, outdir / "timings.csv", include_timings=True)
    if failures:
        lines = ["scenario_id,seed,error"]
        lines += [f"{sid},{seed},{err}" for sid, seed, err in failures]
        (outdir / "failures.csv").write_text("\n".join(lines) + "\n")
    if reports:
        write_figures(reports, outdir)
        summary = aggregate(reports)
        with open(outdir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=1)
    return reports
