"""Render figure-preset CSV files produced by the risrsma CLI as PNG images.

Pure file-to-file: nothing is recomputed.  Curves follow the convention
that sampled (Monte Carlo) results are solid lines and analytical results
are markers.  Input schema:

    sweep_var,sweep_value,method,bs_index,metric,value,stderr,seed
"""

from __future__ import annotations

import argparse
import csv
import sys
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

EXPECTED_HEADER = ["sweep_var", "sweep_value", "method", "bs_index", "metric", "value", "stderr", "seed"]

MARKERS = ["o", "s", "^", "v", "D", "p", "*", "x", "+", "<", ">"]


class SchemaMismatch(Exception):
    """CSV header or row count does not match the documented schema."""


class MissingPreset(Exception):
    """Requested preset name is not known to the renderer."""


@dataclass(frozen=True)
class PresetStyle:
    metric: str
    bs_index: int | None      # None: accept any BS index (used with per-user metrics)
    xlabel: str
    ylabel: str
    title: str
    metric_prefix: bool = False   # match metrics by prefix (per-user families)


PRESET_STYLES: dict[str, PresetStyle] = {
    "fig1a": PresetStyle("sum_rate", 0, "transmit SNR (dB)", "ergodic sum rate (bits/s/Hz)",
                         "Closed forms vs simulation, antenna counts"),
    "fig1b": PresetStyle("sum_rate", 0, "transmit SNR (dB)", "ergodic sum rate (bits/s/Hz)",
                         "Closed forms vs simulation, surface sizes"),
    "fig2": PresetStyle("sum_rate", 0, "transmit SNR (dB)", "ergodic sum rate (bits/s/Hz)",
                        "Rate splitting vs no-splitting baseline"),
    "fig3": PresetStyle("sum_rate", 0, "transmit SNR (dB)", "ergodic sum rate (bits/s/Hz)",
                        "Designed vs random phase shifts"),
    "fig4a": PresetStyle("rate_user_", 0, "transmit SNR (dB)", "per-user rate (bits/s/Hz)",
                         "Per-user rates, uniform QoS", metric_prefix=True),
    "fig4b": PresetStyle("rate_user_", 0, "transmit SNR (dB)", "per-user rate (bits/s/Hz)",
                         "Per-user rates, raised weak-user QoS", metric_prefix=True),
    "fig5a": PresetStyle("total_sum_rate", -1, "transmit SNR (dB)", "total sum rate (bits/s/Hz)",
                         "Protocol comparison, two cells"),
    "fig5b": PresetStyle("total_sum_rate", -1, "transmit SNR (dB)", "total sum rate (bits/s/Hz)",
                         "Protocol comparison, three cells"),
    "fig6a": PresetStyle("total_sum_rate", -1, "BS-RIS distance (m)", "total sum rate (bits/s/Hz)",
                         "Total sum rate vs BS-RIS distance"),
    "fig6b": PresetStyle("total_sum_rate", -1, "RIS-user distance (m)", "total sum rate (bits/s/Hz)",
                         "Total sum rate vs RIS-user distance"),
    "fig7": PresetStyle("total_sum_rate", -1, "outer round", "total sum rate (bits/s/Hz)",
                        "Convergence of the joint design"),
    "fig8": PresetStyle("sum_rate", 0, "transmit SNR (dB)", "ergodic sum rate (bits/s/Hz)",
                        "Sum rate for fixed private-power fractions"),
}


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str | Path
    preset: str
    out_path: str | Path
    dpi: int = 150


def read_rows(csv_path: str | Path) -> list[dict]:
    with open(csv_path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("empty file: row count 0") from None
        if header != EXPECTED_HEADER:
            raise SchemaMismatch(f"unexpected header {header!r}")
        rows = []
        for raw in reader:
            if len(raw) != len(EXPECTED_HEADER):
                raise SchemaMismatch(f"row with {len(raw)} fields: {raw!r}")
            rows.append(dict(zip(EXPECTED_HEADER, raw)))
    if not rows:
        raise SchemaMismatch("no data rows: row count 0")
    return rows


def _is_sampled(method: str) -> bool:
    return method.split(":")[0] == "montecarlo"


def render(spec: PlotSpec) -> Path:
    """Render one preset's CSV to a PNG file and return its path."""
    if spec.preset not in PRESET_STYLES:
        raise MissingPreset(f"unknown preset {spec.preset!r}")
    style = PRESET_STYLES[spec.preset]
    rows = read_rows(spec.csv_path)

    curves: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for row in rows:
        if style.metric_prefix:
            if not row["metric"].startswith(style.metric):
                continue
            label = f'{row["method"]} {row["metric"].replace("rate_user_", "user ")}'
        else:
            if row["metric"] != style.metric:
                continue
            if style.bs_index is not None and int(row["bs_index"]) != style.bs_index:
                continue
            label = row["method"]
        curves[label].append((float(row["sweep_value"]), float(row["value"])))
    if not curves:
        raise SchemaMismatch(
            f"no rows matched metric {style.metric!r} for preset {spec.preset}"
        )

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for i, (label, points) in enumerate(sorted(curves.items())):
        points.sort(key=lambda p: p[0])
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        if _is_sampled(label):
            ax.plot(xs, ys, "-", linewidth=1.8, label=label)
        else:
            ax.plot(
                xs, ys,
                linestyle="--", linewidth=0.8,
                marker=MARKERS[i % len(MARKERS)], markersize=6,
                fillstyle="none", label=label,
            )
    ax.set_xlabel(style.xlabel)
    ax.set_ylabel(style.ylabel)
    ax.set_title(style.title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    out = Path(spec.out_path)
    fig.savefig(out, dpi=spec.dpi, bbox_inches="tight")
    plt.close(fig)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="risplot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one CSV to a PNG")
    p.add_argument("--csv", required=True)
    p.add_argument("--preset", required=True)
    p.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        render(PlotSpec(csv_path=args.csv, preset=args.preset, out_path=args.out))
        return 0
    except (SchemaMismatch, MissingPreset, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
