"""Experiment runner: sweeps, figure presets, long-format CSV output.

CSV schema (one row per sweep point, method, BS and metric):

    sweep_var,sweep_value,method,bs_index,metric,value,stderr,seed

``bs_index`` -1 denotes a network-wide total.  Method labels may carry a
variant suffix after a colon (``mgf:N=10``) so one file can hold a curve
family.  Rows are emitted in deterministic order; re-running a spec with
the same seed produces a byte-identical file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import bs_jensen_rates, bs_mgf_rates, ergodic_sum_rate, nors_jensen_rate
from .channel import los_components
from .errors import InfeasibleQoS, SimError
from .montecarlo import empirical_ergodic_rates
from .optimize import (
    design_ideal_phases,
    ed_protocol,
    full_pipeline,
    gs_power_for_bs,
    phases_from_theta,
    qos_selection_search,
    td_protocol,
)
from .ris import practical_reflection
from .rsma import split_power
from .scenario import RngStream, Scenario, ring_scenario

__all__ = ["ExperimentSpec", "Variant", "run_experiment", "list_presets", "main", "PRESETS"]

CSV_HEADER = "sweep_var,sweep_value,method,bs_index,metric,value,stderr,seed"

VALID_METHODS = (
    "mgf",
    "jensen",
    "montecarlo",
    "proposed",
    "random_phases",
    "td",
    "ed",
    "qos",
    "nors",
)

SWEEP_VARIABLES = ("snr_db", "bs_ris_distance", "ris_user_distance", "t_s", "iterations")


@dataclass(frozen=True)
class Variant:
    """Scenario override applied on top of the base template, with a label."""

    label: str = ""
    overrides: dict = field(default_factory=dict)
    t_fraction: float | str | None = None   # overrides the spec-level policy


@dataclass(frozen=True)
class ExperimentSpec:
    scenario_template: dict
    sweep_variable: str
    grid: tuple[float, ...]
    methods: tuple[str, ...]
    trials: int = 2000
    seed: int = 0
    t_fraction: float | str = 0.5   # "gs" or a fixed private fraction
    variants: tuple[Variant, ...] = (Variant(),)
    thresholds_db: float | tuple[float, ...] | None = None
    per_user_metrics: bool = False

    def validate(self) -> None:
        if not self.methods:
            raise SimError("methods list must not be empty")
        for m in self.methods:
            if m not in VALID_METHODS:
                raise SimError(f"unknown method {m!r}; valid: {VALID_METHODS}")
        if not self.grid:
            raise SimError("sweep grid must not be empty")
        if list(self.grid) != sorted(self.grid):
            raise SimError("sweep grid must be sorted ascending")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise SimError(f"unknown sweep variable {self.sweep_variable!r}")


def _scenario_from_template(template: dict) -> Scenario:
    """Instantiate the ring layout described by a template dict."""
    t = dict(template)
    if "total_power_w" not in t and "snr_db" in t:
        t["total_power_w"] = t.get("noise_variance_w", 1.0) * 10.0 ** (t["snr_db"] / 10.0)
    return ring_scenario(
        t.get("num_bs", 1),
        t["num_antennas"],
        t["num_users"],
        t["ris_elements"],
        total_power_w=t.get("total_power_w", 1.0),
        rician_factor=t.get("rician_factor", 1.0),
        user_rician_factor=t.get("user_rician_factor", math.inf),
        noise_variance_w=t.get("noise_variance_w", 1.0),
        qos_threshold_db=t.get("qos_threshold_db", 5.0),
        bs_distance_m=t.get("bs_distance_m", 50.0),
        user_distance_m=t.get("user_distance_m", 2.0),
        user_spread_deg=t.get("user_spread_deg", 40.0),
        unit_path_loss=t.get("unit_path_loss", True),
        path_loss_exponent=t.get("path_loss_exponent"),
        reference_gain_db=t.get("reference_gain_db"),
    )


def _apply_sweep(template: dict, variable: str, value: float) -> dict:
    out = dict(template)
    if variable == "snr_db":
        out["snr_db"] = value
        out.pop("total_power_w", None)
    elif variable == "bs_ris_distance":
        out["bs_distance_m"] = value
    elif variable == "ris_user_distance":
        out["user_distance_m"] = value
    # "t_s" and "iterations" do not modify the scenario
    return out


def _aligned_thetas(scenario: Scenario, los) -> list[np.ndarray]:
    """Deterministic evaluation design: each BS phase-matched to its first user."""
    thetas = []
    for s in range(scenario.num_bs):
        coeff = los.h_bar_users[s][:, 0].conj() * los.a_ris[s]
        thetas.append(np.exp(-1j * np.angle(coeff)))
    return thetas


def _per_user_rows(result, sweep_var, value, label, seed):
    rows = []
    for s in range(len(result.jensen_common)):
        commons = result.jensen_common[s]
        privates = result.jensen_private[s]
        share = float(np.min(commons)) / len(commons)
        for k in range(len(commons)):
            rows.append(
                (sweep_var, value, label, s, f"rate_user_{k}", share + float(privates[k]), "", seed)
            )
    return rows


def _point_rows(args) -> list[tuple]:
    """All CSV rows of one (variant, sweep value) cell; module-level for pickling."""
    spec, variant, value = args
    template = dict(spec.scenario_template)
    template.update(variant.overrides)
    t_policy = variant.t_fraction if variant.t_fraction is not None else spec.t_fraction
    if spec.sweep_variable == "t_s":
        t_policy = float(value)
    template = _apply_sweep(template, spec.sweep_variable, value)
    scenario = _scenario_from_template(template)
    los = los_components(scenario)
    seed = spec.seed
    sweep_var = spec.sweep_variable
    suffix = f":{variant.label}" if variant.label else ""
    thresholds = spec.thresholds_db
    if isinstance(thresholds, tuple):
        thresholds = np.array(thresholds, dtype=float)
    rows: list[tuple] = []

    eval_methods = [m for m in spec.methods if m in ("mgf", "jensen", "montecarlo")]
    if eval_methods:
        thetas = _aligned_thetas(scenario, los)
        if t_policy == "gs":
            t_eval = gs_power_for_bs(scenario, los, 0, thetas[0])[0]
        else:
            t_eval = float(t_policy)
        for method in eval_methods:
            label = method + suffix
            if method in ("mgf", "jensen"):
                total = 0.0
                for s in range(scenario.num_bs):
                    rate_fn = bs_jensen_rates if method == "jensen" else bs_mgf_rates
                    commons, privates = rate_fn(los, scenario, s, thetas[s], t_eval)
                    rows.append((sweep_var, value, label, s, "common_rate", float(np.min(commons)), "", seed))
                    rows.append((sweep_var, value, label, s, "private_sum_rate", float(np.sum(privates)), "", seed))
                    rows.append((sweep_var, value, label, s, "sum_rate", ergodic_sum_rate(commons, privates), "", seed))
                    total += ergodic_sum_rate(commons, privates)
                rows.append((sweep_var, value, label, -1, "total_sum_rate", total, "", seed))
            else:
                splits = [
                    split_power(scenario.bs_conf(s).total_power_w, t_eval, scenario.bs_conf(s).num_users)
                    for s in range(scenario.num_bs)
                ]
                report = empirical_ergodic_rates(
                    scenario, thetas, splits, spec.trials, RngStream(seed, stream_id=17), los=los
                )
                total = 0.0
                for s in range(scenario.num_bs):
                    commons = report.common_mean[s]
                    privates = report.private_mean[s]
                    weakest = int(np.argmin(commons))
                    rows.append((sweep_var, value, label, s, "common_rate", float(commons[weakest]),
                                 float(report.common_stderr[s][weakest]), seed))
                    rows.append((sweep_var, value, label, s, "private_sum_rate", float(np.sum(privates)),
                                 float(np.linalg.norm(report.private_stderr[s])), seed))
                    rows.append((sweep_var, value, label, s, "sum_rate",
                                 ergodic_sum_rate(commons, privates), "", seed))
                    total += ergodic_sum_rate(commons, privates)
                rows.append((sweep_var, value, label, -1, "total_sum_rate", total, "", seed))

    if "proposed" in spec.methods:
        label = "proposed" + suffix
        try:
            result = full_pipeline(
                scenario,
                los=los,
                thresholds_db=thresholds,
                seed=seed,
                confirm_mc=False,
                max_rounds=8,
            )
        except InfeasibleQoS:
            result = None
        if result is not None:
            if sweep_var == "iterations":
                for i, obj in enumerate(result.trace):
                    rows.append(("iteration", i, label, -1, "total_sum_rate", obj, "", seed))
            else:
                for s in range(scenario.num_bs):
                    rows.append((sweep_var, value, label, s, "sum_rate", result.bs_sum_rate(s), "", seed))
                rows.append((sweep_var, value, label, -1, "total_sum_rate", result.total_sum_rate, "", seed))
                if spec.per_user_metrics:
                    rows.extend(_per_user_rows(result, sweep_var, value, label, seed))

    if "random_phases" in spec.methods:
        gen = RngStream(seed, stream_id=23).generator()
        label = "random_phases" + suffix
        total = 0.0
        for s in range(scenario.num_bs):
            theta = np.exp(2j * np.pi * gen.random(scenario.ris_elements))
            _, rate = gs_power_for_bs(scenario, los, s, theta)
            rows.append((sweep_var, value, label, s, "sum_rate", rate, "", seed))
            total += rate
        rows.append((sweep_var, value, label, -1, "total_sum_rate", total, "", seed))

    if any(m in spec.methods for m in ("td", "ed", "qos")):
        ideal_phases = np.stack(
            [
                phases_from_theta(design_ideal_phases(scenario, los, s, max_outer=20)[0])
                for s in range(scenario.num_bs)
            ]
        )
        if "td" in spec.methods:
            rates = td_protocol(scenario, los, ideal_phases)
            label = "td" + suffix
            for s, r in enumerate(rates):
                rows.append((sweep_var, value, label, s, "sum_rate", float(r), "", seed))
            rows.append((sweep_var, value, label, -1, "total_sum_rate", float(np.sum(rates)), "", seed))
        if "ed" in spec.methods:
            _, _, rates = ed_protocol(scenario, los)
            label = "ed" + suffix
            for s, r in enumerate(rates):
                rows.append((sweep_var, value, label, s, "sum_rate", float(r), "", seed))
            rows.append((sweep_var, value, label, -1, "total_sum_rate", float(np.sum(rates)), "", seed))
        if "qos" in spec.methods:
            label = "qos" + suffix
            thr = thresholds if thresholds is not None else 5.0
            try:
                v = qos_selection_search(scenario, los, ideal_phases, thr)
            except InfeasibleQoS:
                v = None
            if v is not None:
                total = 0.0
                for s in range(scenario.num_bs):
                    theta = practical_reflection(ideal_phases[s], v[s])
                    _, rate = gs_power_for_bs(scenario, los, s, theta)
                    rows.append((sweep_var, value, label, s, "sum_rate", rate, "", seed))
                    total += rate
                rows.append((sweep_var, value, label, -1, "total_sum_rate", total, "", seed))

    if "nors" in spec.methods:
        thetas = _aligned_thetas(scenario, los)
        label = "nors" + suffix
        total = 0.0
        for s in range(scenario.num_bs):
            rate = nors_jensen_rate(los, scenario, s, thetas[s])
            rows.append((sweep_var, value, label, s, "sum_rate", rate, "", seed))
            total += rate
        rows.append((sweep_var, value, label, -1, "total_sum_rate", total, "", seed))
    return rows


def run_experiment(spec: ExperimentSpec, out_path: str | Path) -> Path:
    """Run all (variant, sweep point) cells and write the long-format CSV.

    Cells are independent; RISRSMA_WORKERS > 1 evaluates them in a process
    pool.  Rows are always written in deterministic (variant, grid) order.
    """
    spec.validate()
    cells = [(spec, variant, value) for variant in spec.variants for value in spec.grid]
    workers = int(os.environ.get("RISRSMA_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_point_rows, cells))
    else:
        results = [_point_rows(c) for c in cells]
    out_path = Path(out_path)
    with open(out_path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for rows in results:
            for row in rows:
                f.write(",".join(_fmt(x) for x in row) + "\n")
    return out_path


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


# ---------------------------------------------------------------------------
# Figure presets (desk-scale settings)
# ---------------------------------------------------------------------------

_SNR_GRID = tuple(float(x) for x in range(0, 41, 5))
_BASE = {
    "num_bs": 1,
    "num_antennas": 30,
    "num_users": 3,
    "ris_elements": 10,
    "rician_factor": 1.0,
    "noise_variance_w": 1.0,
    "unit_path_loss": True,
}
# Distance sweeps keep the 2.2 exponent but reference the gain so that the
# default 50 m / 2 m layout has unit cascaded gain.
_DISTANCE_GAIN_DB = 11.0 * math.log10(50.0 * 2.0)


def _preset_specs() -> dict[str, tuple[str, ExperimentSpec]]:
    presets: dict[str, tuple[str, ExperimentSpec]] = {}
    presets["fig1a"] = (
        "closed forms vs Monte Carlo over SNR for antenna counts 10/20/30 (M=5)",
        ExperimentSpec(
            scenario_template={**_BASE, "ris_elements": 5},
            sweep_variable="snr_db",
            grid=_SNR_GRID,
            methods=("mgf", "jensen", "montecarlo"),
            variants=tuple(
                Variant(label=f"N={n}", overrides={"num_antennas": n}) for n in (10, 20, 30)
            ),
        ),
    )
    presets["fig1b"] = (
        "closed forms vs Monte Carlo over SNR for RIS sizes 5/10 (N=30)",
        ExperimentSpec(
            scenario_template=dict(_BASE),
            sweep_variable="snr_db",
            grid=_SNR_GRID,
            methods=("mgf", "jensen", "montecarlo"),
            variants=tuple(
                Variant(label=f"M={m}", overrides={"ris_elements": m}) for m in (5, 10)
            ),
        ),
    )
    presets["fig2"] = (
        "rate splitting vs no-splitting baseline over SNR for K=2,3 (N=15, M=5)",
        ExperimentSpec(
            scenario_template={**_BASE, "num_antennas": 15, "ris_elements": 5},
            sweep_variable="snr_db",
            grid=_SNR_GRID,
            methods=("jensen", "nors"),
            t_fraction="gs",
            variants=tuple(
                Variant(label=f"K={k}", overrides={"num_users": k}) for k in (2, 3)
            ),
        ),
    )
    presets["fig3"] = (
        "designed vs random phases over SNR (N=30, M=10)",
        ExperimentSpec(
            scenario_template={**_BASE, "rician_factor": 10.0, "user_spread_deg": 8.0},
            sweep_variable="snr_db",
            grid=_SNR_GRID,
            methods=("proposed", "random_phases"),
        ),
    )
    presets["fig4a"] = (
        "per-user rates with uniform modest QoS (N=10, M=5)",
        ExperimentSpec(
            scenario_template={**_BASE, "num_antennas": 10, "ris_elements": 5},
            sweep_variable="snr_db",
            grid=tuple(float(x) for x in range(10, 41, 5)),
            methods=("proposed",),
            thresholds_db=0.0,
            per_user_metrics=True,
        ),
    )
    presets["fig4b"] = (
        "per-user rates with a raised threshold for the weak user (N=10, M=5)",
        ExperimentSpec(
            scenario_template={**_BASE, "num_antennas": 10, "ris_elements": 5},
            sweep_variable="snr_db",
            grid=tuple(float(x) for x in range(10, 41, 5)),
            methods=("proposed",),
            thresholds_db=(0.0, 0.0, 10.0),
            per_user_metrics=True,
        ),
    )
    for name, s_count in (("fig5a", 2), ("fig5b", 3)):
        presets[name] = (
            f"proposed vs element-division vs time-division totals over SNR (S={s_count})",
            ExperimentSpec(
                scenario_template={**_BASE, "num_bs": s_count, "rician_factor": 10.0,
                                   "user_spread_deg": 8.0},
                sweep_variable="snr_db",
                grid=tuple(float(x) for x in range(10, 41, 10)),
                methods=("proposed", "ed", "td"),
            ),
        )
    presets["fig6a"] = (
        "total sum rate vs BS-RIS distance at 45 dB transmit SNR",
        ExperimentSpec(
            scenario_template={**_BASE, "num_bs": 2, "snr_db": 45.0, "rician_factor": 10.0,
                               "unit_path_loss": False, "path_loss_exponent": 2.2,
                               "reference_gain_db": _DISTANCE_GAIN_DB},
            sweep_variable="bs_ris_distance",
            grid=(10.0, 25.0, 50.0, 75.0, 100.0),
            methods=("proposed", "ed", "td"),
        ),
    )
    presets["fig6b"] = (
        "total sum rate vs RIS-user distance at 45 dB transmit SNR",
        ExperimentSpec(
            scenario_template={**_BASE, "num_bs": 2, "snr_db": 45.0, "rician_factor": 10.0,
                               "unit_path_loss": False, "path_loss_exponent": 2.2,
                               "reference_gain_db": _DISTANCE_GAIN_DB},
            sweep_variable="ris_user_distance",
            grid=(1.0, 2.0, 4.0, 7.0, 10.0),
            methods=("proposed", "ed", "td"),
        ),
    )
    presets["fig7"] = (
        "pipeline convergence trace at 40 dB for S=2,3 (N=30, M=10)",
        ExperimentSpec(
            scenario_template={**_BASE, "rician_factor": 10.0, "user_spread_deg": 8.0,
                               "snr_db": 40.0},
            sweep_variable="iterations",
            grid=(0.0,),
            methods=("proposed",),
            variants=(
                Variant(label="S=2", overrides={"num_bs": 2}),
                Variant(label="S=3", overrides={"num_bs": 3}),
            ),
        ),
    )
    presets["fig8"] = (
        "sum rate over SNR for fixed private-power fractions (N=30, M=10)",
        ExperimentSpec(
            scenario_template=dict(_BASE),
            sweep_variable="snr_db",
            grid=_SNR_GRID,
            methods=("jensen",),
            variants=tuple(
                Variant(label=f"t={t}", t_fraction=t) for t in (0.2, 0.5, 0.8, 0.99)
            ),
        ),
    )
    return presets


PRESETS = _preset_specs()


def list_presets() -> list[tuple[str, str]]:
    """Preset names with one-line descriptions."""
    return [(name, desc) for name, (desc, _) in PRESETS.items()]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="risrsma", description="RIS/RSMA experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec file")
    p_run.add_argument("--spec", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--trials", type=int, default=None)

    p_preset = sub.add_parser("preset", help="run a named figure preset")
    p_preset.add_argument("name")
    p_preset.add_argument("--out", required=True)
    p_preset.add_argument("--seed", type=int, default=None)
    p_preset.add_argument("--trials", type=int, default=None)

    sub.add_parser("list-presets", help="list figure presets")

    args = parser.parse_args(argv)
    try:
        if args.command == "list-presets":
            for name, desc in list_presets():
                print(f"{name}: {desc}")
            return 0
        if args.command == "run":
            spec = _spec_from_file(args.spec)
        else:
            if args.name not in PRESETS:
                print(f"unknown preset {args.name!r}", file=sys.stderr)
                return 2
            spec = PRESETS[args.name][1]
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        if args.trials is not None:
            spec = replace(spec, trials=args.trials)
        run_experiment(spec, args.out)
        return 0
    except SimError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _spec_from_file(path: str | Path) -> ExperimentSpec:
    with open(path) as f:
        data = json.load(f)
    variants = tuple(
        Variant(
            label=v.get("label", ""),
            overrides=v.get("overrides", {}),
            t_fraction=v.get("t_fraction"),
        )
        for v in data.get("variants", [{}])
    )
    thresholds = data.get("thresholds_db")
    if isinstance(thresholds, list):
        thresholds = tuple(thresholds)
    return ExperimentSpec(
        scenario_template=data["scenario"],
        sweep_variable=data["sweep_variable"],
        grid=tuple(float(x) for x in data["grid"]),
        methods=tuple(data["methods"]),
        trials=int(data.get("trials", 2000)),
        seed=int(data.get("seed", 0)),
        t_fraction=data.get("t_fraction", 0.5),
        variants=variants,
        thresholds_db=thresholds,
        per_user_metrics=bool(data.get("per_user_metrics", False)),
    )


if __name__ == "__main__":
    sys.exit(main())
