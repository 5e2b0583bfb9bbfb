"""Experiment orchestration: seeded runs, scheme A/B comparisons, the
connection-count throughput sweep, and CSV/trace emission.

Output files are pure functions of the resolved configuration and seeds:
re-running an experiment re-creates them byte for byte.
"""

from __future__ import annotations

import csv
import math
import os

from . import metrics
from .config import ScenarioConfig
from .engine import Simulation, trace_from_jsonl, trace_to_jsonl
from .radio import RadioParams, threshold_for_range


class IoError(Exception):
    pass


SUMMARY_COLUMNS = [
    "seed", "scheme", "generated", "delivered", "deadline_miss",
    "pdr_within_deadline", "mean_delay_s", "p95_delay_s", "throughput_kbps",
    "drop_expired", "drop_overflow", "drop_no_route", "drop_gated",
    "drop_starved", "depleted_nodes", "orphan_frames", "max_queue", "error",
]


class RunReport:
    """Metrics of one run, all recomputed from its trace."""

    def __init__(self, seed: int, scheme: str, trace: list[dict]):
        self.seed = seed
        self.scheme = scheme
        self.trace = trace
        cons = metrics.conservation(trace)
        self.generated = cons["generated"]
        self.fates = cons["fates"]
        self.conservation_ok = cons["ok"]
        self.pdr = metrics.overall_pdr(trace)
        self.pdr_per_flow = metrics.pdr_within_deadline(trace)
        self.mean_delay = metrics.mean_delay(trace)
        self.p95_delay = metrics.percentile_delay(trace, 95.0)
        self.session = metrics.session_of(trace)
        self.throughput = metrics.throughput_kbps(trace, self.session)
        self.depleted = metrics.depleted_nodes(trace)
        self.orphan_frames = metrics.orphan_frame_count(trace)
        self.max_queue = metrics.max_queue_length(trace)
        self.exec_orders = {
            rec["ev"]: metrics.execution_order(trace, rec["ev"])
            for rec in metrics.critical_events(trace)
        }

    def row(self) -> list:
        fmt = lambda x: "" if isinstance(x, float) and math.isnan(x) else repr(x)
        return [
            self.seed, self.scheme, self.generated,
            self.fates["delivered"], self.fates["deadline_miss"],
            fmt(round(self.pdr, 6)), fmt(round(self.mean_delay, 6)),
            fmt(round(self.p95_delay, 6)), fmt(round(self.throughput, 6)),
            self.fates["expired"], self.fates["overflow"], self.fates["no_route"],
            self.fates["gated"], self.fates["starved"],
            len(self.depleted), self.orphan_frames, self.max_queue, "",
        ]


class FailedRun:
    """Placeholder for a run whose seed aborted; carries only the error."""

    def __init__(self, seed: int, scheme: str, error: Exception):
        self.seed = seed
        self.scheme = scheme
        self.error = error
        self.trace: list[dict] = []
        self.exec_orders: dict[int, list[int]] = {}

    def row(self) -> list:
        blanks = [""] * (len(SUMMARY_COLUMNS) - 3)
        return [self.seed, self.scheme, *blanks, f"{type(self.error).__name__}: {self.error}"]


def run_one(config: ScenarioConfig, seed: int, scheme: str) -> RunReport:
    sim = Simulation(config, seed=seed, scheme=scheme)
    trace = sim.run()
    return RunReport(seed, scheme, trace)


def effective_radio_range(config: ScenarioConfig) -> tuple[float, float]:
    """(nominal range, reception threshold) the runs will use."""
    r = config["radio"]
    base = RadioParams(
        tx_power=r["tx_power"], tx_gain=r["tx_gain"], rx_gain=r["rx_gain"],
        antenna_height_tx=r["antenna_height_tx"], antenna_height_rx=r["antenna_height_rx"],
        system_loss=r["system_loss"], wavelength=config.wavelength, rx_threshold=1.0,
    )
    return r["nominal_range"], threshold_for_range(base, r["nominal_range"])


def run_header_text(config: ScenarioConfig, seeds: list[int], schemes: list[str]) -> str:
    nominal, threshold = effective_radio_range(config)
    lines = [
        "mwsnsim run header",
        f"schemes: {','.join(schemes)}",
        f"seeds: {','.join(str(s) for s in seeds)}",
        f"effective_radio_range_m: {nominal!r}",
        f"rx_threshold_w: {threshold!r}",
        "resolved configuration:",
        config.to_yaml().rstrip("\n"),
        "",
    ]
    return "\n".join(lines)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def emit_report(
    reports: list[RunReport],
    config: ScenarioConfig,
    out_dir: str,
    seeds: list[int] | None = None,
    schemes: list[str] | None = None,
    write_traces: bool = True,
) -> list[str]:
    """Write an experiment's files; a pure function of the reports, so
    re-emitting produces byte-identical output.

    Always writes run_header.txt, summary.csv and exec_order.csv (header-only
    when the report set is empty), plus per-run trace files and, when exactly
    two schemes are present, ab_summary.csv.
    """
    seeds = seeds if seeds is not None else sorted({rep.seed for rep in reports})
    schemes = schemes if schemes is not None else sorted({rep.scheme for rep in reports})
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from exc
    written = []

    def _path(name):
        written.append(name)
        return os.path.join(out_dir, name)

    with open(_path("run_header.txt"), "w", encoding="utf-8") as fh:
        fh.write(run_header_text(config, seeds, schemes))
    _write_csv(_path("summary.csv"), SUMMARY_COLUMNS, [rep.row() for rep in reports])
    exec_rows = []
    for rep in reports:
        for ev_idx in sorted(rep.exec_orders):
            exec_rows.append([rep.seed, rep.scheme, ev_idx,
                              ";".join(str(n) for n in rep.exec_orders[ev_idx])])
    _write_csv(_path("exec_order.csv"), ["seed", "scheme", "event", "order"], exec_rows)
    _write_csv(_path("aggregate.csv"), ["scheme", "metric", "runs", "mean", "std"],
               _aggregate_rows(reports, schemes))
    if write_traces:
        for rep in reports:
            if not rep.trace:
                continue
            name = f"trace_{rep.scheme}_s{rep.seed}.jsonl"
            with open(_path(name), "w", encoding="utf-8") as fh:
                fh.write(trace_to_jsonl(rep.trace))
    if len(schemes) == 2 and reports:
        _write_csv(_path("ab_summary.csv"),
                   ["seed", f"pdr_{schemes[0]}", f"pdr_{schemes[1]}",
                    f"throughput_{schemes[0]}", f"throughput_{schemes[1]}",
                    f"mean_delay_{schemes[0]}", f"mean_delay_{schemes[1]}"],
                   _ab_rows(reports, seeds, schemes))
    return written


def run_experiment(
    config: ScenarioConfig,
    seeds: list[int],
    schemes: list[str] | None = None,
    out_dir: str | None = None,
    write_traces: bool = True,
) -> list[RunReport]:
    """One run per seed per scheme; paired schemes share each seed's world.

    With an output directory, writes summary.csv, exec_order.csv,
    run_header.txt, the per-run trace_<scheme>_s<seed>.jsonl files and, when
    two schemes run, ab_summary.csv comparing them per seed.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    schemes = schemes or [config.scheduler]
    reports: list[RunReport | FailedRun] = []
    for seed in seeds:
        for scheme in schemes:
            try:
                reports.append(run_one(config, seed, scheme))
            except Exception as exc:
                # a failed run aborts only its own seed; the summary keeps
                # the failure row
                reports.append(FailedRun(seed, scheme, exc))
    if out_dir is not None:
        emit_report(reports, config, out_dir, seeds=seeds, schemes=schemes,
                    write_traces=write_traces)
    return reports


AGGREGATE_METRICS = ["pdr_within_deadline", "mean_delay_s", "throughput_kbps", "delivered"]


def _aggregate_rows(reports: list[RunReport], schemes: list[str]) -> list[list]:
    """Per-scheme mean and standard deviation of the headline metrics
    across seeds."""
    rows = []
    for scheme in schemes:
        group = [rep for rep in reports
                 if rep.scheme == scheme and isinstance(rep, RunReport)]
        if not group:
            continue
        values = {
            "pdr_within_deadline": [rep.pdr for rep in group],
            "mean_delay_s": [rep.mean_delay for rep in group if not math.isnan(rep.mean_delay)],
            "throughput_kbps": [rep.throughput for rep in group],
            "delivered": [float(rep.fates["delivered"]) for rep in group],
        }
        for metric in AGGREGATE_METRICS:
            vals = values[metric]
            if not vals:
                rows.append([scheme, metric, len(group), "", ""])
                continue
            mean = sum(vals) / len(vals)
            var = sum((v - mean) ** 2 for v in vals) / len(vals)
            rows.append([scheme, metric, len(group),
                         repr(round(mean, 6)), repr(round(math.sqrt(var), 6))])
    return rows


def _ab_rows(reports: list, seeds: list[int], schemes: list[str]) -> list[list]:
    by_key = {(rep.seed, rep.scheme): rep for rep in reports}
    fmt = lambda x: "" if math.isnan(x) else repr(round(x, 6))
    rows = []
    for seed in seeds:
        pair = [by_key.get((seed, scheme)) for scheme in schemes]
        if not all(isinstance(rep, RunReport) for rep in pair):
            rows.append([seed, "", "", "", "", "", ""])
            continue
        a, b = pair
        rows.append([seed, fmt(a.pdr), fmt(b.pdr),
                     fmt(a.throughput), fmt(b.throughput),
                     fmt(a.mean_delay), fmt(b.mean_delay)])
    return rows


def throughput_vs_connections(
    config: ScenarioConfig,
    connection_counts: list[int],
    seeds: list[int],
    scheme: str | None = None,
    out_dir: str | None = None,
) -> list[tuple[int, float]]:
    """Mean delivered kbit/s per connection count, averaged over seeds."""
    if any(n < 0 for n in connection_counts):
        raise ValueError("connection counts must be non-negative")
    scheme = scheme or config.scheduler
    series: list[tuple[int, float]] = []
    for n in connection_counts:
        if n == 0:
            series.append((0, 0.0))
            continue
        cfg_n = config.with_overrides(flow_count=n)
        vals = [run_one(cfg_n, seed, scheme).throughput for seed in seeds]
        series.append((n, sum(vals) / len(vals)))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "throughput.csv"),
                   ["connections", "throughput_kbps"],
                   [[n, repr(round(v, 6))] for n, v in series])
    return series


def replay_metric(trace_path: str, metric: str):
    """Recompute a named metric from a trace file."""
    if metric not in metrics.METRIC_FUNCTIONS:
        raise KeyError(f"unknown metric {metric!r}; choose from "
                       f"{sorted(metrics.METRIC_FUNCTIONS)}")
    try:
        with open(trace_path, "r", encoding="utf-8") as fh:
            trace = trace_from_jsonl(fh.read())
    except OSError as exc:
        raise IoError(f"cannot read {trace_path}: {exc}") from exc
    return metrics.METRIC_FUNCTIONS[metric](trace)
