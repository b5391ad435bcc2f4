import math
from dataclasses import replace

import numpy as np
import pytest

from hdrouter.measurement import CoincidenceConfig
from hdrouter.modes import ModeSpace, TwoPhotonPureState
from hdrouter.witness import estimate_density_elements
from hdrouter.experiments import io
from hdrouter.experiments.cli import main
from hdrouter.experiments.config import (ConfigError, builtin_names,
                                         load_config, parse_angle, parse_config, parse_modes,
                                         parse_table)
from hdrouter.experiments.scenarios import (run_correlation_scan, run_longterm, run_switching,
                                            run_witness, window_times)


@pytest.fixture(scope="module")
def ideal():
    return load_config("ideal")


@pytest.fixture(scope="module")
def calibrated():
    return load_config("calibrated")


def with_section(cfg, name, **kw):
    return replace(cfg, **{name: replace(getattr(cfg, name), **kw)})


class TestValueSyntax:
    @pytest.mark.parametrize("text,value", [("pi", math.pi), ("pi/2", math.pi / 2),
                                            ("3*pi/2", 1.5 * math.pi), ("-0.5*pi", -math.pi / 2),
                                            ("-pi", -math.pi), ("0.25", 0.25)])
    def test_angles(self, text, value):
        assert parse_angle(text) == pytest.approx(value)

    def test_bad_angle(self):
        with pytest.raises(ValueError):
            parse_angle("tau")

    def test_mode_lists(self):
        assert parse_modes("-2:2") == (-2, -1, 0, 1, 2)
        assert parse_modes("-4:4:2") == (-4, -2, 0, 2, 4)
        assert parse_modes("-5, 1,3") == (-5, 1, 3)
        assert parse_modes("") == ()
        for bad in ("2:-2", "0:4:0", "1,1"):
            with pytest.raises(ValueError):
                parse_modes(bad)

    def test_tables(self):
        assert parse_table("0:1, -1:0.5") == {0: 1.0, -1: 0.5}
        with pytest.raises(ValueError):
            parse_table("0:1, 0:2")
        with pytest.raises(ValueError):
            parse_table("0=1")


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.modes.L == 6 and cfg.router.visibility == 1.0
        assert cfg.phase_controller().recal_interval == pytest.approx(26 / 60)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key 'visibilty'"):
            parse_config("[router]\nvisibilty = 0.9\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[sorter]\nphi = 0\n")

    @pytest.mark.parametrize("text", ["[router]\nvisibility = 1.5\n", "[noise]\ncrosstalk = 0.7\n",
                                      "[modes]\nL = -1\n", "[witness]\ntrials = 10\n",
                                      "[scan]\nrange_a = -9:9\n", "[modes]\nL = two\n",
                                      "[witness]\nnormalization = full\n",
                                      "[spectrum]\nkind = table\n",
                                      "[witness]\ntarget_alpha_AB = 1:1, 3:1\n"])
    def test_invalid_values(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_snapshot_round_trip(self, calibrated):
        again = parse_config(calibrated.to_text())
        assert again.to_text() == calibrated.to_text()
        assert again.hash() == calibrated.hash()

    def test_hash_tracks_values(self, calibrated):
        assert calibrated.with_seed(1).hash() != calibrated.hash()
        assert calibrated.with_workers(8).hash() == calibrated.hash()

    def test_base_inheritance(self, tmp_path):
        base = tmp_path / "base.ini"
        base.write_text("[modes]\nL = 3\n[router]\nvisibility = 0.9\n")
        child = tmp_path / "child.ini"
        child.write_text("[run]\nbase = base.ini\n[router]\nvisibility = 0.8\n")
        cfg = load_config(child)
        assert cfg.modes.L == 3 and cfg.router.visibility == 0.8

    def test_circular_base(self, tmp_path):
        (tmp_path / "a.ini").write_text("[run]\nbase = b.ini\n")
        (tmp_path / "b.ini").write_text("[run]\nbase = a.ini\n")
        with pytest.raises(ConfigError, match="circular"):
            load_config(tmp_path / "a.ini")

    def test_shipped_profiles_load(self):
        names = builtin_names()
        assert {"calibrated", "ideal", "table1_witness", "fig3_scan", "fig5a_longrun",
                "fig5b_switch"} <= set(names)
        for n in names:
            load_config(n)

    def test_default_index_lists(self, ideal):
        assert ideal.witness_modes("alpha_AB") == (-4, -2, 0, 2, 4)
        assert ideal.witness_modes("pi_AC") == (-5, -3, -1, 1, 3, 5)
        assert ideal.witness_modes("psi_AB") == tuple(range(-5, 6))

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/file.ini")


class TestMatrixFiles:
    def test_round_trip(self, ideal):
        m = run_correlation_scan(ideal)["before_AB"]
        text = io.matrix_to_csv(m, {"config_hash": ideal.hash()})
        back = io.parse_matrix(text)
        assert back == m

    def test_round_trip_reals(self, ideal):
        m = run_correlation_scan(ideal, exact=True)["after_AC"]
        assert io.parse_matrix(io.matrix_to_csv(m)) == m

    def test_negative_cell(self):
        text = "# schema: hdrouter-matrix/1\nl_A\\l_B,-1,0,1\n-1,0,0,5\n0,0,-3,0\n1,4,0,0\n"
        with pytest.raises(io.DataError, match=r":4 cell \(l_A=0, l_B=0\): negative count"):
            io.parse_matrix(text)

    def test_ragged_row(self):
        text = "# schema: hdrouter-matrix/1\nl_A\\l_B,0,1\n0,1\n"
        with pytest.raises(io.DataError, match=":3: expected 3 fields"):
            io.parse_matrix(text)

    def test_missing_schema(self):
        with pytest.raises(io.DataError, match="schema"):
            io.parse_matrix("l_A\\l_B,0\n0,1\n")

    def test_bad_header_line(self):
        with pytest.raises(io.DataError, match=":1: header line"):
            io.parse_matrix("# nothing here\n")


ELEMENT_FIXTURE = """# schema: hdrouter-elements/1
record,l,l2,phase,count
background,,,,0
diag,-1,,,300
diag,0,,,300
diag,1,,,300
super,-1,0,0,300
super,-1,0,1,150
super,-1,0,2,0
super,-1,0,3,150
super,-1,1,0,300
super,-1,1,1,150
super,-1,1,2,0
super,-1,1,3,150
super,0,1,0,300
super,0,1,1,150
super,0,1,2,0
super,0,1,3,150
"""


class TestElementFiles:
    def test_hand_built_fixture(self, tmp_path):
        p = tmp_path / "el.csv"
        p.write_text(ELEMENT_FIXTURE)
        el = io.ingest_counts(p)
        assert el.n_elements == 9
        # same setting probabilities from the exact-mode estimator: P(G) = (1 + cos G)/6
        s = ModeSpace(1)
        rho = TwoPhotonPureState.anti_correlated(s, np.ones(3) / math.sqrt(3)).density()
        ref = estimate_density_elements(rho, [-1, 0, 1], CoincidenceConfig(900, 1, 1, 0, 1),
                                        exact=True)
        np.testing.assert_allclose(ref.counts.phase, el.counts.phase, atol=1e-9)
        np.testing.assert_allclose(el.elements, ref.elements, atol=1e-12)
        np.testing.assert_allclose(el.elements, np.full((3, 3), 1 / 3), atol=1e-12)

    def test_round_trip(self, calibrated):
        run = run_witness(calibrated, "pi_AC")
        back = io.parse_elements(io.elements_to_csv(run.elements))
        np.testing.assert_array_equal(back.elements, run.elements.elements)

    def test_missing_record(self):
        text = ELEMENT_FIXTURE.replace("super,0,1,2,0\n", "")
        with pytest.raises(io.DataError, match="missing super record l=0, l2=1, phase=2"):
            io.parse_elements(text)

    def test_inconsistent_index_set(self):
        text = ELEMENT_FIXTURE + "super,0,2,0,5\n"
        with pytest.raises(io.DataError, match=":19: super record uses modes outside"):
            io.parse_elements(text)

    def test_negative_count(self):
        text = ELEMENT_FIXTURE.replace("diag,0,,,300", "diag,0,,,-1")
        with pytest.raises(io.DataError, match=":5 \\(diag record\\): negative count"):
            io.parse_elements(text)

    def test_unknown_record(self):
        with pytest.raises(io.DataError, match=":3: unknown record type"):
            io.parse_elements("# schema: hdrouter-elements/1\nrecord,l,l2,phase,count\nfoo,,,,1\n")


class TestScans:
    def test_ideal_anti_diagonal(self, ideal):
        m = run_correlation_scan(ideal, exact=True)
        before = m["before_AB"].counts
        anti = np.eye(11, dtype=bool)[:, ::-1]
        assert np.all(before[~anti] == 0) and np.all(before[anti] > 0)
        ells = np.arange(-5, 6)
        even_b = (ells % 2 == 0)
        ab, ac = m["after_AB"].counts, m["after_AC"].counts
        # l_B = -l_A: even rows in port B, odd rows in port C
        np.testing.assert_allclose(ab[anti & even_b[None, :]], before[anti & even_b[None, :]])
        assert np.all(ab[anti & ~even_b[None, :]] < 1e-9)
        np.testing.assert_allclose(ac[anti & ~even_b[None, :]], before[anti & ~even_b[None, :]])

    def test_no_interference(self, ideal):
        cfg = with_section(ideal, "router", visibility=0.0)
        m = run_correlation_scan(cfg, exact=True)
        np.testing.assert_allclose(m["after_AB"].counts, m["before_AB"].counts / 2)
        np.testing.assert_allclose(m["after_AC"].counts, m["before_AB"].counts / 2)

    def test_reproducible_csv(self, calibrated):
        a = io.matrix_to_csv(run_correlation_scan(calibrated)["after_AB"])
        b = io.matrix_to_csv(run_correlation_scan(calibrated)["after_AB"])
        c = io.matrix_to_csv(run_correlation_scan(calibrated.with_seed(2))["after_AB"])
        assert a == b and a != c


class TestWitnessRuns:
    def test_ideal_alpha(self, ideal):
        r = run_witness(ideal, "alpha_AB", exact=True).report
        assert r.fidelity == pytest.approx(1.0, abs=1e-9)
        assert r.certified_d == 5

    def test_ideal_pi(self, ideal):
        assert run_witness(ideal, "pi_AC", exact=True).report.certified_d == 6

    def test_calibrated_psi(self, calibrated):
        run = run_witness(calibrated, "psi_AB", exact=True)
        assert 0.74 <= run.report.fidelity <= 0.78
        assert run.report.certified_d >= 10
        assert run.target_source == "optimized"
        assert run.bias > 0

    def test_shipped_target_reports_alternative(self, calibrated):
        run = run_witness(calibrated, "alpha_AB", exact=True)
        assert run.target_source == "config"
        d = run.as_dict()
        assert "optimized" in d and d["optimized"]["certified_d"] >= 1

    def test_calibrated_error_magnitude(self, calibrated):
        err = run_witness(calibrated, "psi_AB").report.fidelity_err
        assert 0.002 <= err <= 0.01

    def test_unknown_state(self, ideal):
        with pytest.raises(ValueError):
            run_witness(ideal, "chi_AB")


@pytest.fixture(scope="module")
def short(calibrated):
    return with_section(calibrated, "longrun", duration_h=6, window_h=2, trials=100)


class TestLongrun:
    def test_window_times(self, calibrated):
        t = window_times(calibrated)
        assert t[0] == 0 and t[-1] == 39 and len(t) == 40

    def test_zero_drift_is_flat(self, short):
        cfg = with_section(short, "drift", amplitude_decay=0.0, rate_decay=0.0)
        cfg = with_section(cfg, "phase", drift_rate=0.0)
        s = run_longterm(cfg, exact=True)["series"]
        for w in cfg.longrun.states:
            F = np.array([f for f, st in zip(s["F"], s["state"]) if st == w])
            err = np.array([e for e, st in zip(s["F_err"], s["state"]) if st == w])
            assert F.std() < err.mean()

    def test_mode_decay_only(self, short):
        cfg = with_section(short, "drift", amplitude_decay=0.005, rate_decay=0.0)
        s = run_longterm(cfg, exact=True)["series"]
        assert set(s["rate_scale"]) == {1.0}
        for w in cfg.longrun.states:
            F = [f for f, st in zip(s["F"], s["state"]) if st == w]
            assert np.all(np.diff(F) < 0)

    def test_default_profile_decreases_above_bound(self, calibrated):
        s = run_longterm(calibrated, exact=True)["series"]
        for w in calibrated.longrun.states:
            F = np.array([f for f, st in zip(s["F"], s["state"]) if st == w])
            B = np.array([b for b, st in zip(s["bound"], s["state"]) if st == w])
            assert np.all(np.diff(F) < 0)
            assert np.all(F > B)
            # the target is fixed, so the bound is too
            assert np.ptp(B) == 0
        assert np.all(np.diff(s["rate_scale"][::2]) < 0)

    def test_phase_recalibrated(self, short):
        s = run_longterm(with_section(short, "phase", drift_rate=1.0), exact=True)["series"]
        # window 2 h > 26 min, so every window follows a reset plus < 26 min of drift
        assert max(abs(p) for p in s["phi"]) < 5.0


class TestSwitching:
    def test_ideal(self, ideal):
        res = run_switching(ideal)
        assert res["visibility"] == pytest.approx(1.0, abs=0.02)
        assert res["anti_phase_fraction"] == 1.0

    def test_calibrated(self, calibrated):
        res = run_switching(calibrated)
        assert abs(res["visibility"] - 0.97) <= 0.03
        assert res["anti_phase_fraction"] == 1.0
        # at least 100 expected counts in every high half-period
        assert max(res["expected_per_half"]["AB"]) >= 100

    def test_traces_anti_phase(self, calibrated):
        s = run_switching(calibrated, exact=True)["series"]
        ab, ac = np.array(s["counts_AB"]), np.array(s["counts_AC"])
        pos = np.array(s["position"])
        assert ab[pos == 0].min() > ab[pos == 1].max()
        assert ac[pos == 1].min() > ac[pos == 0].max()


class TestCli:
    def test_witness_outputs(self, tmp_path):
        assert main(["witness", "--config", "ideal", "--exact", "--out", str(tmp_path),
                     "--state", "alpha_AB"]) == 0
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["elements_alpha_AB.csv", "run.json", "witness_alpha_AB.json"]
        text = (tmp_path / "witness_alpha_AB.json").read_text()
        for key in ("F_exp", "F_err", "bound", "certified_d", "xi", "target_amplitudes"):
            assert f'"{key}"' in text

    @pytest.mark.parametrize("cmd", ["scan", "witness", "longrun", "switch"])
    def test_byte_identical(self, tmp_path, cmd):
        cfg = tmp_path / "short.ini"
        cfg.write_text("[run]\nbase = calibrated\n[longrun]\nduration_h = 4\nwindow_h = 2\n"
                       "trials = 100\n[witness]\ntrials = 100\n")
        for tag, workers in (("a", "1"), ("b", "3")):
            assert main([cmd, "--config", str(cfg), "--seed", "5", "--workers", workers,
                         "--out", str(tmp_path / tag)]) == 0
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_snapshot_in_outputs(self, tmp_path):
        assert main(["scan", "--config", "ideal", "--out", str(tmp_path)]) == 0
        cfg = load_config("ideal")
        head = (tmp_path / "before_AB.csv").read_text().splitlines()[:8]
        assert f"# config_hash: {cfg.hash()}" in head
        assert any(line.startswith("# config: {") for line in head)

    def test_config_error(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[router]\nphase = 1\n")
        assert main(["scan", "--config", str(bad), "--out", str(tmp_path)]) == 1

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["scan", "--bogus"])
        assert exc.value.code == 1

    def test_data_error(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("# schema: hdrouter-matrix/1\nl_A\\l_B,0\n0,-2\n")
        assert main(["ingest", str(f), "--out", str(tmp_path / "o")]) == 2

    def test_ingest_elements(self, tmp_path):
        f = tmp_path / "el.csv"
        f.write_text(ELEMENT_FIXTURE)
        assert main(["ingest", str(f), "--config", "ideal", "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "ingest_witness.json").exists()

    def test_ingest_empty_counts_is_data_error(self, tmp_path):
        f = tmp_path / "el.csv"
        f.write_text("# schema: hdrouter-elements/1\nrecord,l,l2,phase,count\ndiag,0,,,0\n")
        assert main(["ingest", str(f), "--config", "ideal", "--out", str(tmp_path / "o")]) == 2

    def test_numerical_failure(self, tmp_path):
        cfg = tmp_path / "dark.ini"
        # every mode the source emits is outside the space
        cfg.write_text("[modes]\nL = 1\n[spectrum]\nkind = table\nweights = 4:1\n"
                       "[switch]\nsuperposition = 0,1\n")
        assert main(["scan", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
