"""Experiment configuration, Monte-Carlo sweeps, and CSV persistence.

A sweep varies one of {N, L, M} over a value list; at every (value, trial)
all schemes see the same channel realization so comparisons are paired.
Seeds are derived as (base_seed + trial, salt) with one salt per purpose
(users, channels, optimizer), which makes reruns byte-identical and keeps
non-IRS channels independent of the IRS element count.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .ao import AOConfig, Scheme, TrialResult, run_scheme
from .channels import LargeScaleParams, Topology, draw_channels, place_users
from .system import SystemParams

__all__ = [
    "ParseError",
    "ValidationError",
    "ExperimentConfig",
    "PRESETS",
    "load_config",
    "config_from_dict",
    "preset_config",
    "run_sweep",
    "write_results",
    "summarize",
]

RAW_HEADER = ["scheme", "sweep_var", "sweep_value", "trial", "sum_rate", "feasible",
              "eff_gamma_th", "iters", "wall_ms"]
SUMMARY_HEADER = ["scheme", "sweep_var", "sweep_value", "mean_sum_rate", "std_error", "feasible_trials"]


class ParseError(ValueError):
    """Config file could not be parsed."""


class ValidationError(ValueError):
    """Config contents violate an invariant; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    dims: dict
    sweep_variable: str = "N"
    sweep_values: tuple[int, ...] = (4, 16, 32)
    trials: int = 50
    base_seed: int = 1
    schemes: tuple[Scheme, ...] = (Scheme.PROPOSED, Scheme.RELAY_ONLY, Scheme.RANDOM_IRS, Scheme.INDEPENDENT)
    topology: Topology = field(default_factory=Topology)
    user_center: tuple[float, float] = (0.0, 200.0)
    user_radius: float = 10.0
    large_scale: LargeScaleParams = field(default_factory=LargeScaleParams)
    system_kwargs: dict = field(default_factory=dict)
    ao: AOConfig = field(default_factory=AOConfig)
    record_timing: bool = False
    workers: int = 1

    def __post_init__(self):
        for key in ("M", "L", "N", "K"):
            if key not in self.dims or int(self.dims[key]) < 1:
                raise ValidationError(f"dims.{key} must be a positive integer")
        if self.sweep_variable not in ("N", "L", "M"):
            raise ValidationError("sweep.variable must be one of N, L, M")
        if not self.sweep_values or any(int(v) < 1 for v in self.sweep_values):
            raise ValidationError("sweep.values must be positive")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if not self.schemes:
            raise ValidationError("schemes must be non-empty")
        for value in self.sweep_values:
            d = self.dims_at(value)
            if d["K"] > min(d["M"], d["L"]):
                raise ValidationError(
                    f"K <= min(M, L) violated at sweep value {value}: K={d['K']}, M={d['M']}, L={d['L']}"
                )

    def dims_at(self, sweep_value: int) -> dict:
        d = {k: int(v) for k, v in self.dims.items()}
        d[self.sweep_variable] = int(sweep_value)
        return d

    def system_params(self) -> SystemParams:
        kwargs = dict(self.system_kwargs)
        sigma = kwargs.pop("sigma_k2", 1e-11)
        if np.isscalar(sigma):
            sigma = tuple([float(sigma)] * int(self.dims["K"]))
        return SystemParams(sigma_k2=tuple(sigma), **kwargs)


_SCHEME_NAMES = {s.value: s for s in Scheme}

_TOP_KEYS = {"dims", "topology", "large_scale", "system", "ao", "schemes", "sweep",
             "trials", "base_seed", "record_timing", "workers"}
_TOPOLOGY_KEYS = {"bs", "irs", "relay", "user_center", "user_radius"}
_SWEEP_KEYS = {"variable", "values"}
_SYSTEM_KEYS = {"p_bs_max", "p_r_max", "sigma_k2", "sigma_r2", "gamma_r_th"}
_AO_KEYS = {"max_outer_iters", "outer_tol", "sca_inner_iters", "sca_tol",
            "randomization_samples", "restore_attempts", "stage_order"}
_LS_KEYS = {"d0", "kappa_direct_and_relay", "kappa_irs", "rho_direct", "rho_assisted"}


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {sorted(unknown)}")


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from plain nested dicts."""
    if not isinstance(raw, dict):
        raise ValidationError("top-level config must be an object")
    _check_keys(raw, _TOP_KEYS, "config")
    if "dims" not in raw:
        raise ValidationError("dims is required")
    kwargs: dict = {"dims": dict(raw["dims"])}

    topo_raw = dict(raw.get("topology", {}))
    _check_keys(topo_raw, _TOPOLOGY_KEYS, "topology")
    topo_defaults = Topology()
    kwargs["topology"] = Topology(
        bs_pos=tuple(topo_raw.get("bs", topo_defaults.bs_pos)),
        irs_pos=tuple(topo_raw.get("irs", topo_defaults.irs_pos)),
        relay_pos=tuple(topo_raw.get("relay", topo_defaults.relay_pos)),
    )
    kwargs["user_center"] = tuple(topo_raw.get("user_center", (0.0, 200.0)))
    kwargs["user_radius"] = float(topo_raw.get("user_radius", 10.0))

    ls_raw = dict(raw.get("large_scale", {}))
    _check_keys(ls_raw, _LS_KEYS, "large_scale")
    kwargs["large_scale"] = LargeScaleParams(**ls_raw)

    sys_raw = dict(raw.get("system", {}))
    _check_keys(sys_raw, _SYSTEM_KEYS, "system")
    kwargs["system_kwargs"] = sys_raw

    ao_raw = dict(raw.get("ao", {}))
    _check_keys(ao_raw, _AO_KEYS, "ao")
    if "stage_order" in ao_raw:
        ao_raw["stage_order"] = tuple(ao_raw["stage_order"])
    kwargs["ao"] = AOConfig(**ao_raw)

    if "schemes" in raw:
        names = list(raw["schemes"])
        bad = [n for n in names if n not in _SCHEME_NAMES]
        if bad:
            raise ValidationError(f"unknown scheme(s): {bad}; valid: {sorted(_SCHEME_NAMES)}")
        kwargs["schemes"] = tuple(_SCHEME_NAMES[n] for n in names)

    sweep_raw = dict(raw.get("sweep", {}))
    _check_keys(sweep_raw, _SWEEP_KEYS, "sweep")
    if "variable" in sweep_raw:
        kwargs["sweep_variable"] = str(sweep_raw["variable"])
    if "values" in sweep_raw:
        kwargs["sweep_values"] = tuple(int(v) for v in sweep_raw["values"])

    for key in ("trials", "base_seed", "workers"):
        if key in raw:
            kwargs[key] = int(raw[key])
    if "record_timing" in raw:
        kwargs["record_timing"] = bool(raw["record_timing"])
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config file; errors carry line information."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


# Preset sweep configurations. The fig2* presets cover the headline
# comparisons at full scale; `desk` is the fast configuration the acceptance
# suite runs (smaller arrays, lean AO budget, 3 dB relay threshold).
PRESETS: dict[str, dict] = {
    "fig2a": {
        "dims": {"M": 8, "L": 4, "N": 30, "K": 4},
        "sweep": {"variable": "N", "values": [10, 20, 30, 40, 50]},
        "trials": 50,
    },
    "fig2b": {
        "dims": {"M": 8, "L": 4, "N": 30, "K": 4},
        "sweep": {"variable": "L", "values": [4, 6, 8]},
        "trials": 50,
    },
    "fig2c": {
        "dims": {"M": 8, "L": 4, "N": 30, "K": 4},
        "sweep": {"variable": "M", "values": [4, 6, 8, 10]},
        "trials": 50,
    },
    "desk": {
        "dims": {"M": 4, "L": 2, "N": 8, "K": 2},
        "sweep": {"variable": "N", "values": [4, 16, 32]},
        "trials": 50,
        "system": {"gamma_r_th": 2.0},
        "ao": {"max_outer_iters": 6, "sca_inner_iters": 2, "randomization_samples": 60},
    },
}


def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; valid: {sorted(PRESETS)}")
    return config_from_dict(json.loads(json.dumps(PRESETS[name])))


def _run_cell(config: ExperimentConfig, sweep_value: int, trial: int) -> list[TrialResult]:
    """All schemes on one paired channel realization."""
    dims = config.dims_at(sweep_value)
    users = place_users(config.user_center, config.user_radius, dims["K"], [config.base_seed + trial, 1])
    topo = config.topology.with_users(users)
    ch = draw_channels(topo, config.large_scale, dims, [config.base_seed + trial, 0])
    params = config.system_params()
    out = []
    for scheme in config.schemes:
        try:
            result = run_scheme(scheme, ch, params, config.ao, [config.base_seed + trial, 2])
        except Exception:  # pragma: no cover - individual trial failures are recorded, not fatal
            from .ao import AOTrace

            result = TrialResult(scheme, 0.0, None, AOTrace(), False, 0.0, 0, 0.0)
        result.sweep_var = config.sweep_variable
        result.sweep_value = int(sweep_value)
        result.trial = int(trial)
        out.append(result)
    return out


def run_sweep(config: ExperimentConfig, progress=None) -> list[TrialResult]:
    """Run the full (scheme x sweep value x trial) grid, deterministically.

    `progress` is an optional callable receiving (done_cells, total_cells).
    """
    cells = [(value, trial) for value in config.sweep_values for trial in range(config.trials)]
    results: list[TrialResult] = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_cell, config, value, trial) for value, trial in cells]
            for i, fut in enumerate(futures):
                results.extend(fut.result())
                if progress:
                    progress(i + 1, len(cells))
    else:
        for i, (value, trial) in enumerate(cells):
            results.extend(_run_cell(config, value, trial))
            if progress:
                progress(i + 1, len(cells))
    results.sort(key=lambda r: (r.scheme.value, r.sweep_value, r.trial))
    return results


def summarize(results: list[TrialResult]) -> list[dict]:
    """Per-(scheme, sweep value) mean, standard error, and feasible count."""
    groups: dict[tuple, list[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.scheme.value, r.sweep_var, r.sweep_value), []).append(r)
    rows = []
    for (scheme, var, value), rs in sorted(groups.items()):
        rates = np.array([r.sum_rate for r in rs if r.feasible])
        n = len(rates)
        mean = float(rates.mean()) if n else 0.0
        se = float(rates.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        rows.append({
            "scheme": scheme,
            "sweep_var": var,
            "sweep_value": value,
            "mean_sum_rate": mean,
            "std_error": se,
            "feasible_trials": n,
        })
    return rows


def write_results(results: list[TrialResult], out_dir, record_timing: bool = False) -> list[dict]:
    """Write raw.csv and summary.csv; returns the summary rows.

    Wall times are written as 0 unless `record_timing` is set, so default
    reruns of the same config produce byte-identical files.
    """
    if not results:
        raise ValueError("no results to write")
    import os

    os.makedirs(out_dir, exist_ok=True)
    raw_path = os.path.join(out_dir, "raw.csv")
    with open(raw_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RAW_HEADER)
        for r in results:
            w.writerow([
                r.scheme.value,
                r.sweep_var,
                r.sweep_value,
                r.trial,
                repr(float(r.sum_rate)),
                int(r.feasible),
                repr(float(r.effective_gamma_th)),
                r.outer_iterations,
                int(round(r.wall_ms)) if record_timing else 0,
            ])
    summary = summarize(results)
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for row in summary:
            w.writerow([row["scheme"], row["sweep_var"], row["sweep_value"],
                        repr(row["mean_sum_rate"]), repr(row["std_error"]), row["feasible_trials"]])
    return summary
