import json

import pytest

from qecheat import ConfigError, build_run_setup, load_config
from qecheat.cli import main
from qecheat.config import apply_sets, canonical_yaml, config_digest


class TestLoadConfig:
    def test_empty_file_gives_defaults(self, tmp_path, default_coeffs):
        p = tmp_path / "empty.yaml"
        p.write_text("")
        cfg = load_config(p)
        setup = build_run_setup(cfg)
        assert setup.coefficients == default_coeffs
        assert setup.base_temp == 0.01
        assert setup.num_sites == 50

    def test_no_file_gives_defaults(self):
        cfg = load_config(None)
        assert cfg.physical.time_step == pytest.approx(0.5246e-12)

    def test_unknown_key_names_path_and_line(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("physical:\n  base_temp: 0.01\n  base_tmp: 0.02\n")
        with pytest.raises(ConfigError) as err:
            load_config(p)
        assert "base_tmp" in str(err.value)
        assert "line 3" in str(err.value)
        assert err.value.path == "physical.base_tmp"

    def test_unknown_section_rejected(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("physics:\n  base_temp: 0.01\n")
        with pytest.raises(ConfigError, match="physics"):
            load_config(p)

    def test_wrong_type_rejected_with_line(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("qec:\n  code_distance: 13.5\n")
        with pytest.raises(ConfigError) as err:
            load_config(p)
        assert err.value.line == 2

    def test_nested_override(self, tmp_path):
        p = tmp_path / "ql.yaml"
        p.write_text("numerics:\n  quasilinear:\n    jump_frac: 0.1\n")
        cfg = load_config(p)
        assert cfg.numerics.quasilinear.jump_frac == 0.1
        # untouched siblings keep defaults
        assert cfg.numerics.quasilinear.stable_windows == 2


class TestUnits:
    @pytest.mark.parametrize("text,expected", [
        ('"0.526 ps"', 0.526e-12),
        ('"526 fs"', 526e-15),
        ('"0.0005246 ns"', 0.5246e-12),
        ("5.246e-13", 5.246e-13),
    ])
    def test_time_suffixes(self, tmp_path, text, expected):
        p = tmp_path / "t.yaml"
        p.write_text(f"physical:\n  time_step: {text}\n")
        cfg = load_config(p)
        assert cfg.physical.time_step == pytest.approx(expected, rel=1e-12)

    def test_temperature_and_length_suffixes(self, tmp_path):
        p = tmp_path / "u.yaml"
        p.write_text("physical:\n  base_temp: 10 mK\n"
                     "  lattice_spacing: 1 um\n  lambda_mfp: 0.5 mm\n")
        cfg = load_config(p)
        assert cfg.physical.base_temp == pytest.approx(0.01)
        assert cfg.physical.lattice_spacing == pytest.approx(1e-6)
        assert cfg.physical.lambda_mfp == pytest.approx(0.5e-3)

    def test_unknown_unit_rejected(self, tmp_path):
        p = tmp_path / "u.yaml"
        p.write_text("physical:\n  base_temp: 10 kelvin\n")
        with pytest.raises(ConfigError, match="kelvin"):
            load_config(p)

    def test_unit_string_on_plain_number_rejected(self, tmp_path):
        p = tmp_path / "u.yaml"
        p.write_text('physical:\n  atom_count: "2.5 mol"\n')
        with pytest.raises(ConfigError):
            load_config(p)


class TestSets:
    def test_set_overrides_file(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("physical:\n  num_sites: 10\n")
        cfg = load_config(p, sets=["physical.num_sites=25"])
        assert cfg.physical.num_sites == 25

    def test_set_with_unit_string(self):
        cfg = load_config(None, sets=["physical.time_step=0.5 ps"])
        assert cfg.physical.time_step == pytest.approx(0.5e-12)

    def test_set_deep_path(self):
        cfg = load_config(None,
                          sets=["numerics.quasilinear.enabled=false"])
        assert cfg.numerics.quasilinear.enabled is False

    def test_set_null(self):
        cfg = load_config(None, sets=["numerics.max_seconds=null",
                                      "numerics.max_steps=100"])
        assert cfg.numerics.max_seconds is None
        assert cfg.numerics.max_steps == 100

    def test_malformed_set_rejected(self):
        with pytest.raises(ConfigError, match="key=value"):
            apply_sets({}, ["numerics.max_steps"])

    def test_unknown_set_key_rejected(self):
        with pytest.raises(ConfigError, match="max_stepz"):
            load_config(None, sets=["numerics.max_stepz=1"])


class TestRoundTrip:
    def test_parse_serialize_parse_identity(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("physical:\n  time_step: 0.5 ps\n  num_sites: 30\n"
                     "coefficients:\n  alpha: 1e-6\n"
                     "numerics:\n  sampling_stride: 64\n")
        cfg1 = load_config(p)
        text = canonical_yaml(cfg1)
        q = tmp_path / "round.yaml"
        q.write_text(text)
        cfg2 = load_config(q)
        assert cfg1 == cfg2
        assert canonical_yaml(cfg2) == text
        assert config_digest(cfg1) == config_digest(cfg2)

    def test_digest_sensitive_to_values(self):
        a = load_config(None)
        b = load_config(None, sets=["physical.num_sites=49"])
        assert config_digest(a) != config_digest(b)


class TestCliExitCodes:
    def test_derive_ok(self, capsys):
        assert main(["derive"]) == 0
        out = capsys.readouterr().out
        assert "3.136626e-02" in out
        assert "verdict: pass" in out

    def test_derive_json_report(self, capsys):
        assert main(["derive", "--format", "json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["delta"] == pytest.approx(0.4999438)
        assert report["alpha_ln2_off_K3"] == pytest.approx(8.803e-15,
                                                           rel=1e-3)
        assert "ln(2)" in report["alpha_note"]

    def test_config_error_exits_2(self, capsys, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("nope: 1\n")
        assert main(["derive", "--config", str(p)]) == 2
        assert "nope" in capsys.readouterr().err

    def test_validation_error_exits_2(self, capsys):
        assert main(["derive", "--set", "physical.num_sites=1"]) == 2

    def test_missing_config_file_exits_1(self, capsys, tmp_path):
        missing = tmp_path / "does_not_exist.yaml"
        assert main(["derive", "--config", str(missing)]) == 1

    def test_simulate_bounded_exits_0(self, tmp_path, capsys):
        rc = main(["simulate", "--mode", "quasilinear",
                   "--out", str(tmp_path)])
        assert rc == 0
        outcome = json.loads((tmp_path / "outcome.json").read_text())
        assert outcome["phase"] == "bounded"
        assert outcome["deterministic"] is True
        assert (tmp_path / "trajectory.csv").exists()

    def test_simulate_unbounded_exits_10(self, tmp_path, capsys):
        rc = main(["simulate", "--mode", "quasilinear",
                   "--set", "physical.cooling_power_coeff=0",
                   "--out", str(tmp_path)])
        assert rc == 10
        outcome = json.loads((tmp_path / "outcome.json").read_text())
        assert outcome["phase"] == "unbounded"
        assert 0.1 <= outcome["tau_s"] <= 100.0

    def test_simulate_indeterminate_exits_11(self, tmp_path, capsys):
        rc = main(["simulate", "--mode", "exact",
                   "--set", "numerics.max_steps=2000",
                   "--set", "numerics.max_seconds=null",
                   "--out", str(tmp_path)])
        assert rc == 11

    def test_simulate_instability_exits_12(self, tmp_path, capsys):
        rc = main(["simulate", "--mode", "exact",
                   "--set", "physical.time_step=0.526 ps",
                   "--set", "numerics.max_steps=200000",
                   "--set", "numerics.max_seconds=null",
                   "--out", str(tmp_path)])
        assert rc == 12
        assert "instability" in capsys.readouterr().err

    def test_seedless_deterministic_accepted(self, tmp_path, capsys):
        rc = main(["simulate", "--mode", "quasilinear",
                   "--seedless-deterministic", "--out", str(tmp_path)])
        assert rc == 0


class TestCliCritical:
    def test_synthetic_tau_exact_recovery(self, tmp_path, capsys):
        rc = main(["critical", "--synthetic-tau", "2.0,0.5,1e-7",
                   "--out", str(tmp_path)])
        assert rc == 0
        blob = json.loads((tmp_path / "critical.json").read_text())
        assert blob["zeta"] == pytest.approx(0.5, abs=1e-9)
        assert blob["synthetic"] is True

    def test_bad_synthetic_spec_exits_2(self, capsys):
        assert main(["critical", "--synthetic-tau", "2.0,0.5"]) == 2

    def test_invalid_bracket_exits_1(self, tmp_path, capsys):
        # both endpoints bounded at default heating: instructive failure
        rc = main(["critical", "--mode", "quasilinear",
                   "--bracket-lo", "1e-14", "--bracket-hi", "1e-11",
                   "--iters", "2", "--out", str(tmp_path)])
        assert rc == 1
        assert "bracket" in capsys.readouterr().err


class TestCliSweep:
    def test_sweep_writes_grid_files(self, tmp_path, capsys):
        rc = main(["sweep", "--mode", "exact",
                   "--config", "configs/toy_transition.yaml",
                   "--set", "numerics.max_steps=2000000",
                   "--axis-count", "5", "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "grid.csv").exists()
        assert (tmp_path / "grid.dat").exists()
        assert (tmp_path / "grid.json").exists()
        assert (tmp_path / "journal.ndjson").exists()

    def test_shipped_configs_parse(self):
        for name in ("toy_transition", "no_cooling", "marginal_timestep",
                     "fidelity_check"):
            cfg = load_config(f"configs/{name}.yaml")
            assert cfg is not None
