import json

import numpy as np

from torusperc import cli


def run_cli(args):
    return cli.main(args)


def test_modulus_command_golden(tmp_path):
    assert run_cli(["modulus", "--graph", "T_s_refined", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "modulus.csv").read_text().strip().splitlines()
    header = rows[0].split(",")
    values = dict(zip(header, rows[1].split(",")))
    assert abs(float(values["alpha_rw_im"]) - np.sqrt(6 / 7)) < 1e-10
    assert abs(float(values["alpha_cp_im"]) - 1.0) < 1e-8
    manifest = json.loads((tmp_path / "modulus_manifest.json").read_text())
    assert manifest["version"]
    assert manifest["config_hash"]


def test_cardy_command(tmp_path):
    code = run_cli(["cardy", "--ratio", "0.5", "--delta", "0.05",
                    "--trials", "4000", "--seed", "7", "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "cardy.csv").read_text().strip().splitlines()
    ratio, delta, trials, est, se = rows[1].split(",")
    assert abs(float(est) - 0.5) < max(3 * float(se), 0.02)


def test_result_files_reproducible(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    args = ["cardy", "--ratio", "0.3", "--delta", "0.08", "--trials", "500",
            "--seed", "9"]
    assert run_cli(args + ["--out", str(d1)]) == 0
    assert run_cli(args + ["--out", str(d2)]) == 0
    assert (d1 / "cardy.csv").read_bytes() == (d2 / "cardy.csv").read_bytes()


def test_missing_seed_is_invalid(tmp_path, capsys):
    code = run_cli(["cardy", "--ratio", "0.5", "--trials", "100",
                    "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "invalid-config"


def test_config_file_run(tmp_path):
    cfgfile = tmp_path / "exp.json"
    cfgfile.write_text(json.dumps({
        "command": "modulus", "graph": "T_s", "out": str(tmp_path)}))
    assert run_cli(["--config", str(cfgfile)]) == 0
    assert (tmp_path / "modulus.csv").exists()


def test_config_file_excludes_flags(tmp_path, capsys):
    cfgfile = tmp_path / "exp.json"
    cfgfile.write_text(json.dumps({"command": "modulus"}))
    code = run_cli(["--config", str(cfgfile), "modulus"])
    assert code == 2


def test_config_file_unknown_field(tmp_path, capsys):
    cfgfile = tmp_path / "exp.json"
    cfgfile.write_text(json.dumps({"command": "modulus", "bogus": 1}))
    assert run_cli(["--config", str(cfgfile)]) == 2
    assert "unknown" in json.loads(capsys.readouterr().err)["message"]


def test_resource_exhaustion_exit_code(tmp_path, capsys):
    code = run_cli(["embed", "--graph", "T_h", "--svg",
                    "--window", "0,100000,0,100000", "--out", str(tmp_path)])
    assert code == 3
    assert json.loads(capsys.readouterr().err)["error"] == "resource-exhaustion"


def test_mixed_command(tmp_path):
    code = run_cli(["mixed", "--rect", "3x3", "--q-grid", "0,0.5",
                    "--trials", "400", "--seed", "3", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "mixed.csv").exists()
    assert (tmp_path / "mixed_summary.csv").exists()


def test_pivotal_exact_command(tmp_path):
    code = run_cli(["pivotal", "--rect", "2x1", "--exact", "--out", str(tmp_path)])
    assert code == 0
    text = (tmp_path / "pivotal_exact.csv").read_text()
    assert "crossing_coeff" in text


def test_pack_command_with_svg(tmp_path):
    code = run_cli(["pack", "--graph", "T_s", "--svg", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "packing.csv").exists()
    assert (tmp_path / "packing.svg").exists()


def test_embed_command_writes_positions(tmp_path):
    assert run_cli(["embed", "--graph", "T_h", "--alpha-source", "rw",
                    "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "positions.csv").read_text().strip().splitlines()
    assert lines[0] == "vertex,x,y"
    assert len(lines) == 5


def test_graph_file_input(tmp_path):
    import json
    spec = {"vertices": 4,
            "edges": [[0, 2, 0, 0], [0, 3, 0, -1], [0, 1, -1, 0],
                      [1, 2, 0, 0], [1, 3, 0, -1], [2, 3, 0, 0]],
            "positions": [["0", "0"], ["1/2", "0"], ["1/4", "1/4"], ["1/4", "3/4"]],
            "role": "primal-3-regular"}
    gpath = tmp_path / "graph.json"
    gpath.write_text(json.dumps(spec))
    assert run_cli(["modulus", "--graph-file", str(gpath),
                    "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "modulus.csv").read_text().strip().splitlines()
    values = dict(zip(rows[0].split(","), rows[1].split(",")))
    assert abs(float(values["alpha_rw_im"]) - 1.0) < 1e-10


def test_hfield_command_with_heatmap(tmp_path):
    code = run_cli(["hfield", "--delta", "0.08", "--trials", "256", "--seed",
                    "2", "--svg", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "hfield.csv").exists()
    assert (tmp_path / "hfield_0.08.svg").read_text().startswith("<svg")


def test_cross_command_worker_invariance(tmp_path):
    base = ["cross", "--graph", "T_h", "--delta", "0.08", "--trials", "2048",
            "--seed", "5"]
    d1, d2 = tmp_path / "w1", tmp_path / "w4"
    assert run_cli(base + ["--workers", "1", "--out", str(d1)]) == 0
    assert run_cli(base + ["--workers", "4", "--out", str(d2)]) == 0
    assert (d1 / "crossing.csv").read_bytes() == (d2 / "crossing.csv").read_bytes()
