"""Scenario parsing, command exit codes, artifacts, determinism."""

import os

import numpy as np
import pytest

from transtri.cli import Scenario, load_scenario, main, run, verify_only
from transtri.errors import ConfigError

SCEN_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def scen(name):
    return os.path.join(SCEN_DIR, name)


class TestParsing:
    def test_scenario_a_fields(self):
        s = load_scenario(scen("scenario_a.cfg"))
        assert s.ambient_dim == 2
        assert s.mesh_spec == {"generator": "grid", "box_lo": [-2.0, -2.0],
                               "box_hi": [2.0, 2.0], "resolution": 4}
        assert s.map_family == "circle"
        assert s.map_params == {"center": [0.0, 0.0], "radius": 1.0}
        assert s.config.seed == 1
        assert s.outputs["svg"]

    def test_malformed_line_reports_number(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[scenario]\nambient_dim = 2\nnonsense without equals\n")
        with pytest.raises(ConfigError) as info:
            load_scenario(bad)
        assert "line 3" in str(info.value)

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[scenario]\nambient_dim = 2\n"
                       "[mesh]\ngenerator = grid\nbox_lo = 0 0\nbox_hi = 1 1\n"
                       "[map]\nfamily = circle\ncenter = 0 0\nradius = 1\n"
                       "[pipeline]\nwarp_speed = 9\n")
        with pytest.raises(ConfigError, match="warp_speed"):
            load_scenario(bad)

    def test_missing_section(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[scenario]\nambient_dim = 2\n")
        with pytest.raises(ConfigError, match="mesh"):
            load_scenario(bad)

    def test_mesh_from_file(self, tmp_path):
        mesh = tmp_path / "m.txt"
        mesh.write_text("3 1\n0.0 0.0\n1.0 0.0\n0.0 1.0\n3 0 1 2\n")
        cfg = tmp_path / "s.cfg"
        cfg.write_text("[scenario]\nambient_dim = 2\n"
                       "[mesh]\ngenerator = file\npath = m.txt\n"
                       "[map]\nfamily = point\nvalue = 5 5\n")
        s = load_scenario(cfg)
        code = verify_only(s, out_dir=str(tmp_path / "out"))
        assert code == 0


class TestCommands:
    def test_malformed_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[scenario]\nambient_dim= 2\n???\n")
        code = main(["verify-only", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "line 3" in capsys.readouterr().err

    def test_run_scenario_c_end_to_end(self, tmp_path, capsys):
        out = tmp_path / "out_c"
        code = main(["run", scen("scenario_c.cfg"), "--out", str(out)])
        assert code == 0
        for name in ("report.csv", "summary.txt", "chain_metadata.txt", "mesh.svg"):
            assert (out / name).exists(), name
        assert not [p for p in os.listdir(out) if p.startswith(".tmp-")]
        assert "result: PASS" in (out / "summary.txt").read_text()

    def test_verify_only_disjoint_passes(self, tmp_path):
        code = main(["verify-only", scen("scenario_disjoint.cfg"),
                     "--out", str(tmp_path / "o")])
        assert code == 0

    def test_verify_only_tangent_fails_with_tangent_record(self, tmp_path):
        out = tmp_path / "out_t"
        code = main(["verify-only", scen("scenario_tangent.cfg"), "--out", str(out)])
        assert code == 1
        csv = (out / "report.csv").read_text()
        assert ";tangent;" in csv

    def test_same_seed_byte_identical_metadata(self, tmp_path):
        s = load_scenario(scen("scenario_c.cfg"))
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run(s, out_dir=str(out1)) == 0
        assert run(s, out_dir=str(out2)) == 0
        b1 = (out1 / "chain_metadata.txt").read_bytes()
        b2 = (out2 / "chain_metadata.txt").read_bytes()
        assert b1 == b2

    def test_seed_override_changes_metadata(self, tmp_path):
        s = load_scenario(scen("scenario_c.cfg"))
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        run(s, out_dir=str(out1))
        run(s, seed=99, out_dir=str(out2))
        assert (out1 / "chain_metadata.txt").read_bytes() != \
            (out2 / "chain_metadata.txt").read_bytes()

    def test_cli_overrides_apply(self, tmp_path):
        code = main(["verify-only", scen("scenario_disjoint.cfg"),
                     "--out", str(tmp_path / "o"),
                     "--density", "16", "--max-retries", "4", "--tol-rank", "1e-5"])
        assert code == 0

    def test_exit_matches_report_flag(self, tmp_path):
        # degenerate 3d scenario: verify-only fails on the unperturbed mesh
        out = tmp_path / "deg"
        code = main(["verify-only", scen("scenario_b_degenerate.cfg"),
                     "--out", str(out), "--density", "8"])
        assert code == 1
        assert "result: FAIL" in (out / "summary.txt").read_text()
        obj = (out / "mesh.obj").read_text().splitlines()
        assert any(line.startswith("v ") for line in obj)
        assert any(line.startswith("f ") for line in obj)
        assert (out / "curve_samples.csv").exists()

    def test_unknown_mesh_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[scenario]\nambient_dim = 2\n"
                       "[mesh]\ngenerator = grid\nbox_lo = 0 0\nbox_hi = 1 1\n"
                       "resolutoin = 4\n"
                       "[map]\nfamily = point\nvalue = 0 0\n")
        with pytest.raises(ConfigError, match="resolutoin"):
            load_scenario(bad)


class TestCoefficientFamilies:
    def test_poly_curve_rows(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("[scenario]\nambient_dim = 2\n"
                       "[mesh]\ngenerator = grid\nbox_lo = 0 0\nbox_hi = 1 1\n"
                       "[map]\nfamily = poly_curve\n"
                       "coeff0 = 0 0\ncoeff1 = 1 0.5\ncoeff2 = -0.3 0.2\n"
                       "lo = 0\nhi = 1\n")
        s = load_scenario(cfg)
        assert s.map_params["coeffs"].shape == (3, 2)
        assert s.map_params["lo"] == 0.0 and s.map_params["hi"] == 1.0
        from transtri.smoothmap import map_from_params
        h = map_from_params(s.map_family, s.map_params)
        assert np.allclose(h.eval([1.0]), [0.7, 0.7])

    def test_poly_curve_missing_row(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("[scenario]\nambient_dim = 2\n"
                       "[mesh]\ngenerator = grid\nbox_lo = 0 0\nbox_hi = 1 1\n"
                       "[map]\nfamily = poly_curve\ncoeff0 = 0 0\ncoeff2 = 1 1\n")
        with pytest.raises(ConfigError, match="coeff1"):
            load_scenario(cfg)

    def test_surface_patch_grid_of_rows(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("[scenario]\nambient_dim = 3\n"
                       "[mesh]\ngenerator = grid\nbox_lo = 0 0 0\nbox_hi = 1 1 1\n"
                       "[map]\nfamily = surface_patch\n"
                       "coeff_0_0 = 0 0 0.25\ncoeff_1_0 = 1 0 0.1\n"
                       "coeff_0_1 = 0 1 0.05\ncoeff_1_1 = 0 0 0.2\n"
                       "lo = 0 0\nhi = 1 1\n")
        s = load_scenario(cfg)
        assert s.map_params["coeffs"].shape == (2, 2, 3)
        from transtri.smoothmap import map_from_params
        h = map_from_params(s.map_family, s.map_params)
        assert np.allclose(h.eval([0.5, 0.5]), [0.5, 0.5, 0.375])

    def test_torus_knot_integer_windings(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("[scenario]\nambient_dim = 3\n"
                       "[mesh]\ngenerator = grid\nbox_lo = 0 0 0\nbox_hi = 1 1 1\n"
                       "[map]\nfamily = torus_knot\np = 2\nq = 3\n"
                       "big_radius = 1\nsmall_radius = 0.35\n")
        s = load_scenario(cfg)
        assert s.map_params["p"] == 2 and isinstance(s.map_params["p"], int)
