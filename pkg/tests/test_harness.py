"""Configuration, sweep machinery, bench and CLI plumbing."""

import json
from pathlib import Path

import pytest

from thinmach.cli import main
from thinmach.harness import (
    CSV_HEADER,
    ConfigError,
    DEFAULT_CONFIG,
    RunConfig,
    acoustic_bench,
    run_single,
    sweep,
    validate,
)

SMALL = {
    "grid": {"L": 12.0, "nx": 24, "ny": 24, "nz": 2},
    "epsilon_list": [0.5, 0.25],
    "eta_list": [0.5],
    "end_time": 0.1,
    "snapshot_interval": 0.05,
    "recipe": {
        "kind": "ill-prepared",
        "v0_stream_modes": [[0, 1, 0.4, 0.0]],
        "s0_modes": [[1, 0, 0.3, 0.0]],
        "psi0_modes": [[1, 1, 0.2, 0.0]],
        "windowed": False,
    },
    "seed": 7,
}


def _config(tmp_path, **overrides):
    raw = {**SMALL, "output_dir": str(tmp_path / "out")}
    raw.update(overrides)
    return RunConfig.from_dict(raw)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"grid": {"L": 1.0, "nq": 3}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"recipe": {"kind": "well-prepared", "junk": []}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bench": {"quux": 1}})


def test_violations_detected(tmp_path):
    assert _config(tmp_path).violations() == []
    assert any("cfl" in v for v in _config(tmp_path, cfl=1.5).violations())
    assert any("decreasing" in v
               for v in _config(tmp_path, epsilon_list=[0.25, 0.5]).violations())
    assert any("divide" in v
               for v in _config(tmp_path, snapshot_interval=0.03).violations())
    assert any("wrap-around" in v
               for v in _config(tmp_path, epsilon_list=[0.01]).violations())
    assert any("ensemble" in v
               for v in _config(tmp_path, ensemble_size=0).violations())
    cfg = _config(tmp_path, cfl=1.5)
    with pytest.raises(ConfigError):
        cfg.check()


def test_default_config_validates():
    report = validate(RunConfig.from_dict(DEFAULT_CONFIG), quick=True)
    assert report.passed, str(report)


def test_validate_flags_bad_cfl_and_law():
    bad_cfl = RunConfig.from_dict({**DEFAULT_CONFIG, "cfl": 1.5})
    rep = validate(bad_cfl, quick=True)
    assert not rep.passed
    assert any("cfl" in d for _, ok, d in rep.checks if not ok)

    bad_law = RunConfig.from_dict({**DEFAULT_CONFIG, "law": {"kind": "linear", "slope": -1.0}})
    rep = validate(bad_law, quick=True)
    assert not rep.passed
    names = {n for n, ok, _ in rep.checks if not ok}
    assert "pressure-hypotheses" in names


def test_run_single_rows(tmp_path):
    cfg = _config(tmp_path)
    rows = run_single(cfg, 0.5, 0.5)
    assert len(rows) == 3  # tau = 0, 0.05, 0.1
    assert [r.tau for r in rows] == [0.0, 0.05, 0.1]
    for r in rows:
        assert r.epsilon == 0.5 and r.delta == 0.5 and r.eta == 0.5
        assert r.E_naive_B >= 0 and r.E_naive_full >= 0 and r.E_corrected >= 0
        assert r.dissipation >= -1e-12
    assert rows[0].E_corrected <= 1e-10  # data built to match the ansatz at tau = 0


def test_sweep_outputs_and_determinism(tmp_path):
    cfg = _config(tmp_path, ensemble_size=2)
    res = sweep(cfg)
    assert res.summary["gaps"] == []
    assert len(res.rows) == 2 * 1 * 3
    csv1 = Path(res.csv_path).read_bytes()
    assert csv1.decode().splitlines()[0] == CSV_HEADER

    cfg2 = _config(tmp_path, ensemble_size=2, output_dir=str(tmp_path / "out2"))
    res2 = sweep(cfg2)
    assert Path(res2.csv_path).read_bytes() == csv1

    cfg3 = RunConfig.from_dict({**SMALL, "ensemble_size": 2, "seed": 8,
                                "output_dir": str(tmp_path / "out3")})
    res3 = sweep(cfg3)
    assert Path(res3.csv_path).read_bytes() != csv1

    assert (tmp_path / "out" / "summary.json").exists()
    assert (tmp_path / "out" / "convergence.png").stat().st_size > 0
    assert (tmp_path / "out" / "history.png").stat().st_size > 0


def test_sweep_threaded_matches_serial(tmp_path):
    cfg = _config(tmp_path)
    res = sweep(cfg)
    cfg2 = _config(tmp_path, threads=2, output_dir=str(tmp_path / "thr"))
    res2 = sweep(cfg2)
    assert Path(res2.csv_path).read_bytes() == Path(res.csv_path).read_bytes()


def test_csv_numbers_roundtrip(tmp_path):
    cfg = _config(tmp_path)
    res = sweep(cfg)
    lines = Path(res.csv_path).read_text().splitlines()
    parsed = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
    for row, vals in zip(res.rows, parsed):
        assert row.astuple() == vals  # 17 significant digits round-trip exactly


def test_sweep_partial_failure_policy(tmp_path):
    # the largest epsilon breaks positivity, the small one succeeds
    cfg = _config(
        tmp_path,
        epsilon_list=[0.9, 0.1],
        recipe={
            "kind": "ill-prepared",
            "v0_stream_modes": [],
            "s0_modes": [[1, 0, 1.2, 0.0]],
            "psi0_modes": [],
            "windowed": False,
        },
    )
    res = sweep(cfg)
    assert len(res.summary["gaps"]) == 1
    assert res.summary["gaps"][0]["epsilon"] == 0.9
    assert {r.epsilon for r in res.rows} == {0.1}


def test_sweep_singleton_epsilon_insufficient_points(tmp_path):
    cfg = _config(tmp_path, epsilon_list=[0.5])
    res = sweep(cfg)
    notes = {
        v["note"]
        for eta in res.summary["rates_E_naive_B"].values()
        for v in eta.values()
    }
    assert notes == {"insufficient points"}


def test_sweep_rest_data_rate_skipped(tmp_path):
    cfg = _config(
        tmp_path,
        recipe={"kind": "well-prepared", "v0_stream_modes": [],
                "s0_modes": [], "psi0_modes": [], "windowed": False},
    )
    res = sweep(cfg)
    for r in res.rows:
        assert r.E_naive_B == 0.0 and r.E_naive_full == 0.0
    notes = {
        v["note"]
        for eta in res.summary["rates_E_naive_B"].values()
        for v in eta.values()
    }
    assert notes == {"skipped: zero values"}


def test_well_prepared_large_eps_energy_bounded(tmp_path):
    # shear data at eps = 0.5: E_naive(tau) > 0 but stays bounded by the
    # energy actually present in the data (no blow-up along the horizon)
    cfg = _config(
        tmp_path,
        epsilon_list=[0.5],
        end_time=0.2,
        snapshot_interval=0.05,
        recipe={"kind": "well-prepared", "v0_stream_modes": [[0, 1, 0.4, 0.0]],
                "s0_modes": [], "psi0_modes": [], "windowed": False},
    )
    from thinmach.compressible import total_energy
    from thinmach.initialdata import build_initial_3d

    law = cfg.law()
    st0 = build_initial_3d(cfg.recipe(0.5, 0.5), cfg.grid3(0.5), law)
    budget = total_energy(st0, law, 0.5) / cfg.grid3(0.5).delta
    rows = run_single(cfg, 0.5, 0.5)
    late = [r.E_naive_full for r in rows if r.tau > 0]
    assert all(v > 0 for v in late)
    assert all(v <= 4.0 * budget for v in late)


def test_corrected_leq_naive_plus_acoustic_at_initial_time(tmp_path):
    from thinmach.acoustic import acoustic_energy
    from thinmach.initialdata import acoustic_initial

    cfg = _config(tmp_path)
    law = cfg.law()
    rows = run_single(cfg, 0.5, 0.5)
    first = rows[0]
    ac = acoustic_initial(cfg.recipe(0.5, 0.5), cfg.grid2(), law)
    assert first.E_corrected <= first.E_naive_full + acoustic_energy(ac) + 1e-12


def test_bound_quantities_stay_in_band_across_eps(tmp_path):
    # the vertically averaged a-priori quantities are uniformly bounded
    # along the sweep (bounded, not convergent)
    cfg = _config(tmp_path, epsilon_list=[0.5, 0.25, 0.125])
    res = sweep(cfg, with_validation=False)
    assert res.summary["gaps"] == []
    eps_max = 0.5
    for col in ("mbar_norm", "rho_ess_norm", "rho_res_norm"):
        ref = max(getattr(r, col) for r in res.rows if r.epsilon == eps_max)
        worst = max(getattr(r, col) for r in res.rows)
        assert worst <= 4.0 * max(ref, 1e-12)


def test_bench_zero_data(tmp_path):
    cfg = _config(
        tmp_path,
        recipe={"kind": "well-prepared", "v0_stream_modes": [[0, 1, 0.4, 0.0]],
                "s0_modes": [], "psi0_modes": [], "windowed": False},
    )
    rep = acoustic_bench(cfg)
    assert rep["passed"]
    assert all(r["value"] == 0.0 for r in rep["rows"])


def test_bench_scaling_pair_arithmetic(tmp_path):
    # q = 8, p = 4 satisfies 2/q = 1/2 - 1/p
    assert 2.0 / 8.0 == 0.5 - 1.0 / 4.0
    cfg = _config(tmp_path, bench={"q": 3.0, "p": 4.0, "k": 0, "samples": 64,
                                   "horizon": 0.05})
    with pytest.raises(ValueError):
        acoustic_bench(cfg)


def test_bench_refuses_wrap_guard_violation(tmp_path):
    cfg = _config(tmp_path, epsilon_list=[0.01])
    with pytest.raises(ConfigError):
        acoustic_bench(cfg)


def test_bench_writes_outputs(tmp_path):
    cfg = _config(tmp_path)
    rep = acoustic_bench(cfg)
    assert (tmp_path / "out" / "acoustic_rows.csv").exists()
    assert (tmp_path / "out" / "dispersive_scaling.png").stat().st_size > 0
    assert len(rep["rows"]) == 2


def test_cli_validate_and_overrides(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({**SMALL, "output_dir": str(tmp_path / "o")}))
    assert main(["validate", "--config", str(cfg_path)]) == 0
    assert main(["validate", "--config", str(cfg_path), "--set", "cfl=1.5"]) == 1
    assert main(["validate", "--config", str(cfg_path),
                 "--set", 'law={"kind": "linear", "slope": -1.0}']) == 1


def test_cli_sweep_run_bench(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({**SMALL, "output_dir": str(tmp_path / "o")}))
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "o" / "rows.csv").exists()
    assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "r"),
                 "--snapshots"]) == 0
    assert (tmp_path / "r" / "rows.csv").exists()
    assert (tmp_path / "r" / "snapshot_0000.bin").exists()
    assert (tmp_path / "r" / "snapshot_0000.json").exists()
    assert main(["acoustic-bench", "--config", str(cfg_path),
                 "--set", "epsilon_list=[0.5]"]) == 0
    out = capsys.readouterr().out
    assert "bench: PASS" in out


def test_cli_rejects_unknown_config_key(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({**SMALL, "zzz": 1}))
    assert main(["validate", "--config", str(cfg_path)]) == 2


def test_record_timings_populates_wall_seconds(tmp_path):
    cfg = _config(tmp_path, record_timings=True, epsilon_list=[0.5])
    rows = run_single(cfg, 0.5, 0.5)
    assert all(r.wall_seconds > 0.0 for r in rows)
    off = _config(tmp_path, epsilon_list=[0.5])
    rows_off = run_single(off, 0.5, 0.5)
    assert all(r.wall_seconds == 0.0 for r in rows_off)


def test_sweep_embeds_invariant_suite(tmp_path):
    cfg = _config(tmp_path, epsilon_list=[0.5])
    res = sweep(cfg)
    suite = res.summary["invariant_suite"]
    assert suite["passed"] is True
    assert any(c["name"] == "mass-conservation" for c in suite["checks"])


def test_config_json_roundtrip(tmp_path):
    cfg = _config(tmp_path)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg.to_dict()))
    back = RunConfig.from_json(p)
    assert back == cfg
