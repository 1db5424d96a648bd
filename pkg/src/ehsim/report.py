"""Report directory: report.json, summary.txt, soc.csv, packets.csv."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .engine import RunReport
from .sensing import SPECIES

REPORT_FILES = ("report.json", "summary.txt", "soc.csv", "packets.csv")


def _dump(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_report(report: RunReport, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = report.to_json()
    (out / "report.json").write_text(_dump(data))
    (out / "summary.txt").write_text(summarize(data))

    with open(out / "soc.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s"] + [f"node{n.node_id}_soc_j" for n in report.nodes])
        for t, socs in report.soc_series:
            w.writerow([repr(t)] + [repr(s) for s in socs])

    with open(out / "packets.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["node_id", "seq", "measured_at_s", "sent_at_s", "attempts", "hops", "delivered"]
            + [sp.column for sp in SPECIES]
            + ["temp_c", "rh_pct", "soc_j"]
        )
        for p in report.packets:
            m = p.measurement
            w.writerow(
                [p.node_id, p.sequence, repr(m.timestamp), repr(p.sent_at), p.attempts, p.hops, int(p.delivered)]
                + [repr(v) for v in m.ppm]
                + [repr(m.temperature), repr(m.relative_humidity), repr(m.soc)]
            )
    return out


def load_report(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "report.json"
    return json.loads(path.read_text())


def summarize(data: dict) -> str:
    cfg = data["config"]
    source = cfg.get("scenario") or cfg.get("trace_path")
    lines = [
        f"run: {source}, {data['duration_s'] / 86400:g} days, {cfg['nodes']} node(s), seed {cfg['seed']}, {cfg['mode']} mode",
        "",
    ]
    led = data["ledger"]
    lines.append(
        "ledger: required {:.3f} J/d, recovered {:.3f} J/d, margin {:+.3f} J/d".format(
            led["total_consumption_j_per_day"], led["total_recovery_j_per_day"], led["margin_j_per_day"]
        )
    )
    lines.append("")
    for n in data["nodes"]:
        a = n["audit"]
        kinds: dict[str, int] = {}
        for e in n["events"]:
            kinds[e["kind"]] = kinds.get(e["kind"], 0) + 1
        prr = "n/a" if n["prr"] is None else f"{n['prr']:.4f}"
        lines += [
            f"node {n['node_id']}: soc {n['start_soc_j']:.4f} -> {n['final_soc_j']:.4f} J",
            f"  packets emitted {n['packets_emitted']}, delivered {n['packets_delivered']}, prr {prr}",
            f"  stored {a['stored_j']:.4f} J, consumed {a['consumed_j']:.4f} J, clamped {a['clamped_j']:.4f} J, audit residual {a['residual_j']:.3e} J",
            "  harvest by source (J): " + ", ".join(f"{k} {v:.4f}" for k, v in sorted(a["per_source_j"].items())),
            "  events: " + (", ".join(f"{k} x{v}" for k, v in sorted(kinds.items())) or "none"),
        ]
        if n["daily"]:
            lines.append("  day  soc_gain_j  consumed_j  clamped_j  packets")
            for d in n["daily"]:
                lines.append(
                    f"  {d['day']:>3}  {d['soc_gain_j']:>+10.4f}  {d['consumed_j']:>10.4f}  {d['clamped_j']:>9.4f}  {d['packets']:>7}"
                )
        lines.append("")
    return "\n".join(lines)
