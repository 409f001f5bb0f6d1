"""Traceability exports: decision/checkpoint/metric tables plus figures.

The export path writes either three CSVs or one JSON report, and always
renders two PNG figures next to them: metric trajectories by revolution
and the event timeline. Everything is derived from the ledger alone.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import ledger as lg
from .engine import replay_events
from .flags import FlagDecision

DECISIONS_HEADER = ["revolution", "decision", "target_stage", "resolver"]
CHECKPOINTS_HEADER = ["revolution", "kind", "checkpoint_id", "digest"]
METRICS_HEADER = ["revolution", "metric", "value", "stage"]


def decisions_table(events: list[lg.LedgerEvent]) -> list[list]:
    rows = []
    for event in events:
        if event.kind != lg.FLAG_RESOLVED:
            continue
        decision = FlagDecision.from_json(event.payload["decision"])
        rows.append(
            [
                event.payload["revolution"],
                decision.kind,
                decision.target_stage or "",
                event.payload.get("resolver", ""),
            ]
        )
    return rows


def checkpoints_table(events: list[lg.LedgerEvent]) -> list[list]:
    return [
        [
            event.payload["revolution"],
            event.payload["kind"],
            event.payload["checkpoint_id"],
            event.payload["digest"],
        ]
        for event in events
        if event.kind == lg.CHECKPOINT_EMITTED
    ]


def metrics_table(events: list[lg.LedgerEvent]) -> list[list]:
    """Long-format metric rows, one per (revolution, metric)."""
    rows = []
    for event in events:
        if event.kind != lg.STAGE_COMPLETED:
            continue
        for name, value in sorted(event.payload["metrics"].items()):
            rows.append([event.payload["revolution"], name, value, event.payload["stage"]])
    return rows


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def export_run(workdir: str | Path, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write the report files for one run; returns the paths created."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    events = lg.read_ledger(lg.ledger_path(workdir))
    state = replay_events(events, workdir)

    written: list[Path] = []
    if fmt == "csv":
        written.append(
            _write_csv(out_dir / "decisions.csv", DECISIONS_HEADER, decisions_table(events))
        )
        written.append(
            _write_csv(
                out_dir / "checkpoints.csv", CHECKPOINTS_HEADER, checkpoints_table(events)
            )
        )
        written.append(
            _write_csv(out_dir / "metrics.csv", METRICS_HEADER, metrics_table(events))
        )
    else:
        doc = {
            "run": state.summary(),
            "decisions": [
                dict(zip(DECISIONS_HEADER, row)) for row in decisions_table(events)
            ],
            "checkpoints": [
                dict(zip(CHECKPOINTS_HEADER, row)) for row in checkpoints_table(events)
            ],
            "metrics": [dict(zip(METRICS_HEADER, row)) for row in metrics_table(events)],
            "events": [event.to_json() for event in events],
        }
        target = out_dir / "report.json"
        target.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        written.append(target)

    written.extend(render_figures(events, out_dir))
    return written


def render_figures(events: list[lg.LedgerEvent], out_dir: str | Path) -> list[Path]:
    """Render metric trajectories and the event timeline as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    written = []

    series: dict[str, list[tuple[int, float]]] = {}
    for revolution, name, value, _stage in metrics_table(events):
        series.setdefault(name, []).append((revolution, value))

    fig, ax = plt.subplots(figsize=(7, 4))
    for name in sorted(series):
        points = sorted(series[name])
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=name)
    ax.set_xlabel("revolution")
    ax.set_ylabel("value")
    ax.set_title("Metrics by revolution")
    if series:
        ax.legend(loc="best", fontsize="small")
    else:
        ax.text(0.5, 0.5, "no metrics recorded", ha="center", va="center")
    fig.tight_layout()
    metrics_png = out_dir / "metrics.png"
    fig.savefig(metrics_png)
    plt.close(fig)
    written.append(metrics_png)

    kinds = list(dict.fromkeys(event.kind for event in events))
    fig, ax = plt.subplots(figsize=(8, 0.4 * max(len(kinds), 4) + 1.5))
    for event in events:
        ax.plot(event.sequence, kinds.index(event.kind), "o", color="tab:blue")
    ax.set_yticks(range(len(kinds)))
    ax.set_yticklabels(kinds, fontsize="small")
    ax.set_xlabel("ledger sequence")
    ax.set_title("Event timeline")
    ax.invert_yaxis()
    fig.tight_layout()
    timeline_png = out_dir / "timeline.png"
    fig.savefig(timeline_png)
    plt.close(fig)
    written.append(timeline_png)

    return written
