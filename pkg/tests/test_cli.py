import csv
import json

import pytest

from csie.cli import EXIT_CONFIG, EXIT_OK, main

CUBE = """
[geometry]
generator = "cube"
edge = 1.0
divisions = 1

[frequency]
value = 149.896229e6

[solver]
tol = 1e-6
far_field_step = 15.0

[reference]
kind = "none"
"""

SPHERE = """
[geometry]
generator = "icosphere"
diameter = 1.0
subdivisions = 1

[frequency]
ka = 1.6

[solver]
tol = 1e-6
far_field_step = 15.0
"""


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_mesh_info(tmp_path):
    out = tmp_path / "out"
    assert main(["mesh-info", "--config", _write(tmp_path, CUBE), "--out", str(out)]) == EXIT_OK
    text = (out / "mesh_quality.csv").read_text()
    assert "12" in text and "18" in text
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["mesh"]["triangles"] == 12 and manifest["mesh"]["unknowns"] == 18
    assert manifest["command"] == "mesh-info"


def test_solve_writes_outputs(tmp_path):
    cfg = CUBE + """
[[formulation]]
kind = "EFIE"

[[formulation]]
kind = "CSIE-J"
alpha = 1.0
inner_tol = 1e-8
"""
    out = tmp_path / "out"
    assert main(["solve", "--config", _write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "summary.csv")
    assert [r["formulation"] for r in rows] == ["EFIE", "CSIE-J"]
    assert all(r["status"] == "converged" for r in rows)
    for stem in ("f000_efie", "f000_csiej_a1"):
        for suffix in ("_residuals.csv", "_farfield.csv", "_rcs.csv"):
            assert (out / (stem + suffix)).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "summary.csv" in manifest["outputs"]
    assert manifest["volatile_outputs"] == ["timings.csv"]


@pytest.mark.parametrize("body", ["", "[[formulation]]\nkind = \"BEM\"\n",
                                  "[[formulation]]\nkind = \"EFIE\"\ncolor = 1\n"])
def test_config_errors_exit_1(tmp_path, body):
    out = tmp_path / "out"
    assert main(["solve", "--config", _write(tmp_path, CUBE + body), "--out", str(out)]) \
        == EXIT_CONFIG


def test_missing_config_exits_1(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.toml")]) == EXIT_CONFIG


def test_reproducible_with_cache(tmp_path):
    cfg = _write(tmp_path, SPHERE + '\n[[formulation]]\nkind = "MFIE"\n')
    cache = str(tmp_path / "cache")
    hashes = []
    for name in ("a", "b"):     # cold, then warm cache
        out = tmp_path / name
        assert main(["solve", "--config", cfg, "--out", str(out), "--cache", cache]) == EXIT_OK
        hashes.append(json.loads((out / "manifest.json").read_text())["outputs"])
    assert hashes[0] == hashes[1]
    out = tmp_path / "c"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "manifest.json").read_text())["outputs"] == hashes[0]
    # Mie reference is used automatically for spheres
    err = float(_rows(tmp_path / "a" / "summary.csv")[0]["error_db"])
    assert err < -15


def test_spectrum(tmp_path):
    cfg = CUBE + '\n[[formulation]]\nkind = "CSIE-JM"\n\n[[formulation]]\nkind = "EFIE"\n'
    out = tmp_path / "out"
    assert main(["spectrum", "--config", _write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "condition.csv")
    assert [int(r["size"]) for r in rows] == [36, 18]
    assert all(float(r["condition"]) >= 1 for r in rows)
    cfg = cfg.replace("tol = 1e-6", "tol = 1e-6\nspectrum_max_size = 20")
    assert main(["spectrum", "--config", _write(tmp_path, cfg, "small.toml"),
                 "--out", str(out)]) == EXIT_CONFIG


def test_alpha_tradeoff_single(tmp_path):
    cfg = SPHERE + "\n[tradeoff]\nalphas = [1.0]\n"
    cfg += '\n[[formulation]]\nkind = "CSIE-J"\ninner_tol = 1e-8\n'
    out = tmp_path / "out"
    assert main(["alpha-tradeoff", "--config", _write(tmp_path, cfg), "--out", str(out)]) \
        == EXIT_OK
    rows = _rows(out / "tradeoff.csv")
    assert len(rows) == 1 and rows[0]["alpha"] == "1"
    assert main(["alpha-tradeoff", "--config", _write(tmp_path, SPHERE, "empty.toml"),
                 "--out", str(out)]) == EXIT_CONFIG
