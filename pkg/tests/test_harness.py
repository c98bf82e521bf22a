import json

import numpy as np
import pytest

from irsrelay.ao import Scheme
from irsrelay.harness import (
    ExperimentConfig,
    ParseError,
    ValidationError,
    config_from_dict,
    load_config,
    preset_config,
    run_sweep,
    summarize,
    write_results,
)

TINY = {
    "dims": {"M": 2, "L": 2, "N": 2, "K": 1},
    "sweep": {"variable": "N", "values": [2, 4]},
    "trials": 2,
    "base_seed": 3,
    "schemes": ["relay_only", "random_irs"],
    "system": {"gamma_r_th": 0.5},
    "ao": {"max_outer_iters": 2, "sca_inner_iters": 1, "randomization_samples": 10},
}


def test_minimal_config_defaults():
    cfg = config_from_dict({"dims": {"M": 4, "L": 2, "N": 8, "K": 2}})
    assert cfg.trials == 50
    assert cfg.sweep_variable == "N"
    assert len(cfg.schemes) == 4
    assert cfg.system_params().gamma_r_th == 10.0


def test_k_exceeding_min_ml_rejected():
    with pytest.raises(ValidationError, match="K <= min"):
        config_from_dict({"dims": {"M": 4, "L": 4, "N": 8, "K": 5}})


def test_k_checked_at_every_sweep_point():
    with pytest.raises(ValidationError, match="sweep value 2"):
        config_from_dict({
            "dims": {"M": 8, "L": 4, "N": 8, "K": 4},
            "sweep": {"variable": "L", "values": [4, 2]},
        })


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError, match="unknown key"):
        config_from_dict({"dims": {"M": 2, "L": 2, "N": 2, "K": 1}, "bogus": 1})
    with pytest.raises(ValidationError, match="unknown key"):
        config_from_dict({"dims": {"M": 2, "L": 2, "N": 2, "K": 1}, "system": {"noise": 1}})


def test_unknown_scheme_rejected():
    with pytest.raises(ValidationError, match="unknown scheme"):
        config_from_dict({"dims": {"M": 2, "L": 2, "N": 2, "K": 1}, "schemes": ["nope"]})


def test_malformed_file_parse_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\n  'single': quotes\n}")
    with pytest.raises(ParseError, match="line 2"):
        load_config(path)


def test_load_roundtrip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY))
    cfg = load_config(path)
    assert cfg.schemes == (Scheme.RELAY_ONLY, Scheme.RANDOM_IRS)
    assert cfg.sweep_values == (2, 4)


def test_presets_valid():
    for name in ("fig2a", "fig2b", "fig2c", "desk"):
        cfg = preset_config(name)
        assert cfg.trials == 50
    assert preset_config("desk").dims == {"M": 4, "L": 2, "N": 8, "K": 2}
    with pytest.raises(ValidationError):
        preset_config("nope")


def test_run_sweep_shape_and_pairing():
    cfg = config_from_dict(TINY)
    results = run_sweep(cfg)
    assert len(results) == 2 * 2 * 2  # schemes x values x trials
    # Pairing: same (value, trial) across schemes used identical channels;
    # verified via the deterministic seed derivation by re-drawing.
    from irsrelay.channels import draw_channels, place_users

    dims = cfg.dims_at(2)
    users = place_users(cfg.user_center, cfg.user_radius, dims["K"], [cfg.base_seed + 0, 1])
    topo = cfg.topology.with_users(users)
    ch1 = draw_channels(topo, cfg.large_scale, dims, [cfg.base_seed + 0, 0])
    ch2 = draw_channels(topo, cfg.large_scale, dims, [cfg.base_seed + 0, 0])
    assert ch1.checksum() == ch2.checksum()


def test_single_cell_single_scheme():
    cfg = config_from_dict({
        **TINY,
        "schemes": ["relay_only"],
        "sweep": {"variable": "N", "values": [2]},
        "trials": 1,
    })
    results = run_sweep(cfg)
    assert len(results) == 1
    assert results[0].scheme is Scheme.RELAY_ONLY
    assert results[0].sum_rate >= 0.0


def test_write_results_and_summary(tmp_path):
    cfg = config_from_dict(TINY)
    results = run_sweep(cfg)
    summary = write_results(results, tmp_path)
    raw = (tmp_path / "raw.csv").read_text().splitlines()
    assert raw[0] == "scheme,sweep_var,sweep_value,trial,sum_rate,feasible,eff_gamma_th,iters,wall_ms"
    assert len(raw) == 1 + len(results)
    assert len(summary) == 4  # 2 schemes x 2 values
    for row in summary:
        assert row["feasible_trials"] <= cfg.trials


def test_summary_mean_and_stderr():
    from irsrelay.ao import AOTrace, TrialResult

    def make(rate, trial):
        return TrialResult(Scheme.RELAY_ONLY, rate, None, AOTrace(), True, 1.0, 1, 0.0,
                           sweep_var="N", sweep_value=4, trial=trial)

    rows = summarize([make(1.0, 0), make(3.0, 1)])
    assert rows[0]["mean_sum_rate"] == pytest.approx(2.0)
    assert rows[0]["std_error"] == pytest.approx(1.0)  # std(ddof=1)/sqrt(2) = sqrt(2)/sqrt(2)
    assert rows[0]["feasible_trials"] == 2


def test_infeasible_excluded_from_mean():
    from irsrelay.ao import AOTrace, TrialResult

    good = TrialResult(Scheme.RELAY_ONLY, 2.0, None, AOTrace(), True, 1.0, 1, 0.0,
                       sweep_var="N", sweep_value=4, trial=0)
    bad = TrialResult(Scheme.RELAY_ONLY, 0.0, None, AOTrace(), False, 0.0, 0, 0.0,
                      sweep_var="N", sweep_value=4, trial=1)
    rows = summarize([good, bad])
    assert rows[0]["mean_sum_rate"] == pytest.approx(2.0)
    assert rows[0]["feasible_trials"] == 1


def test_rerun_byte_identical(tmp_path):
    cfg = config_from_dict(TINY)
    a, b = tmp_path / "a", tmp_path / "b"
    write_results(run_sweep(cfg), a)
    write_results(run_sweep(cfg), b)
    assert (a / "raw.csv").read_bytes() == (b / "raw.csv").read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_cli_end_to_end(tmp_path, capsys):
    from irsrelay.cli import main

    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(TINY))
    rc = main(["--config", str(cfg_path), "--out", str(tmp_path / "out"), "--trials", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "raw.csv" in out
    assert (tmp_path / "out" / "raw.csv").exists()


def test_cli_rejects_bad_input(tmp_path, capsys):
    from irsrelay.cli import main

    rc = main(["--config", str(tmp_path / "missing.json")])
    assert rc == 2
    rc = main(["--preset", "desk", "--schemes", "bogus"])
    assert rc == 2
