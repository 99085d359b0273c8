"""Per-application reliability/latency statistics, requirement verdicts and report files."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

from .engine import MS
from .frames import App, to_app

NOT_APPLICABLE = "n/a"
NO_DATA = "no data"
PASS = "pass"
FAIL = "fail"

# five applications whose requirements the scenarios are judged on
REQUIREMENT_APPS = (App.REMOTE_CONTROL, App.SAFETY, App.AR, App.AGV, App.CONDITION_MONITORING)


@dataclass
class AppStats:
    app: App
    frames_sent: int = 0
    bytes_sent: int = 0
    frames_received: int = 0
    bytes_received: int = 0
    frames_dropped: int = 0
    bytes_dropped: int = 0
    # measured from network state when the run stops
    frames_in_flight: int = 0
    bytes_in_flight: int = 0
    delays: list = field(default_factory=list, repr=False)

    @property
    def unaccounted_frames(self):
        """Zero whenever flow conservation holds."""
        return (self.frames_sent - self.frames_received - self.frames_dropped
                - self.frames_in_flight)

    @property
    def mean_delay(self) -> Optional[float]:
        return sum(self.delays) / len(self.delays) if self.delays else None

    @property
    def max_delay(self) -> Optional[int]:
        return max(self.delays) if self.delays else None

    @property
    def p99_delay(self) -> Optional[int]:
        return percentile(self.delays, 99)

    def summary(self) -> dict:
        rdr = rdr_percent(self)
        frdr = rdr_percent(self, by="frames")
        return {
            "app": self.app.value,
            "frames_sent": self.frames_sent,
            "frames_received": self.frames_received,
            "frames_dropped": self.frames_dropped,
            "frames_in_flight": self.frames_in_flight,
            "bytes_sent": self.bytes_sent,
            "bytes_received": self.bytes_received,
            "bytes_dropped": self.bytes_dropped,
            "bytes_in_flight": self.bytes_in_flight,
            "rdr_percent": rdr,
            "frame_rdr_percent": frdr,
            "mean_delay_ms": None if self.mean_delay is None else self.mean_delay / MS,
            "p99_delay_ms": None if self.p99_delay is None else self.p99_delay / MS,
            "max_delay_ms": None if self.max_delay is None else self.max_delay / MS,
        }


def percentile(samples, pct):
    """Nearest-rank percentile of integer samples (None when empty)."""
    if not samples:
        return None
    ordered = sorted(samples)
    rank = max(1, math.ceil(pct / 100 * len(ordered)))
    return ordered[rank - 1]


class StatsCollector:
    def __init__(self):
        self.apps = {}

    def get(self, app) -> AppStats:
        app = to_app(app)
        st = self.apps.get(app)
        if st is None:
            st = self.apps[app] = AppStats(app)
        return st

    def on_sent(self, frame):
        st = self.get(frame.app)
        st.frames_sent += 1
        st.bytes_sent += frame.size_bytes

    def on_delivered(self, frame, now):
        st = self.get(frame.app)
        st.frames_received += 1
        st.bytes_received += frame.size_bytes
        st.delays.append(now - frame.created_at)

    def on_dropped(self, frame):
        st = self.get(frame.app)
        st.frames_dropped += 1
        st.bytes_dropped += frame.size_bytes

    def set_in_flight(self, frames):
        for st in self.apps.values():
            st.frames_in_flight = 0
            st.bytes_in_flight = 0
        for f in frames:
            st = self.get(f.app)
            st.frames_in_flight += 1
            st.bytes_in_flight += f.size_bytes


def rdr_percent(stats: AppStats, by="bytes"):
    """Received traffic as a percentage of sent traffic.

    Frames still queued when the run stops count as not received; the drain window
    (generators stop before the horizon) keeps that residue to frames that are
    genuinely stuck. Returns ``NOT_APPLICABLE`` when nothing was sent.
    """
    if by == "bytes":
        received, sent = stats.bytes_received, stats.bytes_sent
    else:
        received, sent = stats.frames_received, stats.frames_sent
    if sent <= 0:
        return NOT_APPLICABLE
    return 100.0 * received / sent


@dataclass
class RequirementSpec:
    max_delay: int           # ns
    min_rdr: float = 99.9    # percent

    def __post_init__(self):
        if self.max_delay <= 0 or self.min_rdr <= 0:
            raise ValueError("requirement thresholds must be positive")


def default_requirements():
    """Upper latency bounds of the five smart-factory applications."""
    return {
        App.REMOTE_CONTROL: RequirementSpec(1 * MS),
        App.SAFETY: RequirementSpec(1 * MS),
        App.AR: RequirementSpec(50 * MS),
        App.AGV: RequirementSpec(20 * MS),
        App.CONDITION_MONITORING: RequirementSpec(100 * MS),
    }


def requirements_matrix(stats: dict, reqs: dict, delay_rule="max"):
    """``{app: {"RDR": verdict, "Delay": verdict}}`` with verdicts pass/fail/no data."""
    if delay_rule not in ("max", "mean", "p99"):
        raise ValueError(f"unknown delay rule {delay_rule!r}")
    out = {}
    for app, req in reqs.items():
        app = to_app(app)
        st = stats.get(app)
        row = {}
        rdr = rdr_percent(st) if st is not None else NOT_APPLICABLE
        row["RDR"] = NO_DATA if rdr == NOT_APPLICABLE else (PASS if rdr >= req.min_rdr else FAIL)
        observed = None
        if st is not None and st.delays:
            observed = {"max": st.max_delay, "mean": st.mean_delay, "p99": st.p99_delay}[delay_rule]
        row["Delay"] = NO_DATA if observed is None else (PASS if observed <= req.max_delay else FAIL)
        out[app] = row
    return out


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(round(value, 9))
    return str(value)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


APP_COLUMNS = ["app", "frames_sent", "frames_received", "frames_dropped", "frames_in_flight",
               "bytes_sent", "bytes_received", "bytes_dropped", "bytes_in_flight",
               "rdr_percent", "frame_rdr_percent", "mean_delay_ms", "p99_delay_ms",
               "max_delay_ms"]
MATRIX_COLUMNS = ["app", "RDR", "Delay"]
SERIES_COLUMNS = ["time_ns", "port", "occupancy", "drops"] + [f"q{i}" for i in range(8)]


def emit_report(result: dict, out_dir, fmt="both"):
    """Write ``app_stats.csv``, ``requirements.csv``, ``queue_series.csv`` and ``report.json``.

    ``result`` is the plain-data dict returned by a scenario run. Returns the written paths.
    """
    if fmt not in ("rows", "structured", "both"):
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out_dir}: {exc.strerror}") from exc
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report file {path}: {exc.strerror}") from exc
        written.append(path)

    if fmt in ("rows", "both"):
        put("app_stats.csv", rows_to_csv(result["apps"], APP_COLUMNS))
        matrix_rows = [{"app": a, **v} for a, v in result["requirements"].items()]
        put("requirements.csv", rows_to_csv(matrix_rows, MATRIX_COLUMNS))
        put("queue_series.csv", rows_to_csv(result.get("queue_series", []), SERIES_COLUMNS))
    if fmt in ("structured", "both"):
        put("report.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    return written


SWEEP_COLUMNS = ["parameter", "value", "app", "rdr_percent", "mean_delay_ms", "max_delay_ms",
                 "frames_sent", "frames_received", "frames_dropped"]


def sweep_rows(parameter, results):
    """Flatten ``[(value, run_result), ...]`` into plot-ready rows."""
    rows = []
    for value, res in results:
        for app in res["apps"]:
            rows.append({"parameter": parameter, "value": value, **app})
    return rows


def emit_sweep_report(parameter, results, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    rows = sweep_rows(parameter, results)
    paths = []
    path = os.path.join(out_dir, "sweep.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows, SWEEP_COLUMNS))
    paths.append(path)
    path = os.path.join(out_dir, "sweep.json")
    doc = {"parameter": parameter,
           "runs": [{"value": v, "apps": r["apps"], "requirements": r["requirements"]}
                    for v, r in results]}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    paths.append(path)
    return paths
