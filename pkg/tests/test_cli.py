import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from inscribed_trefoil.cli import (
    EXIT_INPUT,
    EXIT_OK,
    EXIT_UNRESOLVED,
    InputError,
    RunConfig,
    dumps,
    export_plot_data,
    load_schema,
    main,
    run,
)
from inscribed_trefoil.curve import preset


def run_main(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def search_doc():
    return run(RunConfig("search", "paper-trefoil-s3", grid=12, basepoints=[0.0]))


@pytest.fixture(scope="module")
def certify_doc():
    return run(RunConfig("certify", "figure-eight-r3"))


def test_search_contains_symmetric(search_doc):
    doc, code = search_doc
    assert code == EXIT_OK
    ts = [s["t"] for s in doc["payload"]["runs"][0]["solutions"]]
    assert any(np.allclose(t, np.arange(6) / 6, atol=1e-6) for t in ts)
    jsonschema.validate(doc, load_schema("result"))


def test_search_bytes_reproducible(search_doc):
    again, _ = run(RunConfig("search", "paper-trefoil-s3", grid=12, basepoints=[0.0]))
    assert dumps(again) == dumps(search_doc[0])


def test_invariant_great_circle(capsys):
    code, out, _ = run_main(capsys, "invariant", "--curve", "great-circle-s3")
    assert code == EXIT_OK
    doc = json.loads(out)
    run0 = doc["payload"]["runs"][0]
    assert run0["kappa"] == 0 and run0["solutions"] == []


def test_certify_figure_eight(certify_doc):
    doc, code = certify_doc
    assert code == EXIT_OK
    cert = doc["payload"]["certificate"]
    assert cert["kind"] in ("TrefoilLeft", "TrefoilRight")
    assert cert["margin"] > 1e-6


def test_certify_unresolved_exit_code(monkeypatch):
    import inscribed_trefoil.cli as cli
    from inscribed_trefoil.solve import Branch, Unresolved

    monkeypatch.setattr(cli, "certify_trefoil", lambda *a, **k: Unresolved(Branch.SPATIAL, 0, "forced"))
    doc, code = run(RunConfig("certify", "paper-trefoil-s3", grid=6))
    assert code == EXIT_UNRESOLVED
    assert doc["payload"]["status"] == "Unresolved"


def test_thickness_command(capsys):
    code, out, _ = run_main(capsys, "thickness", "--curve", "great-circle-s3", "--grid", "16")
    assert code == EXIT_OK
    assert abs(json.loads(out)["payload"]["tau"] - 1.0) < 1e-9


def test_quadrisecants_command(tmp_path, capsys):
    code, out, _ = run_main(capsys, "quadrisecants", "--curve", "trefoil-r3", "--plot-dir", str(tmp_path))
    assert code == EXIT_OK
    quads = json.loads(out)["payload"]["quadrisecants"]
    assert quads
    lines = (tmp_path / "line.csv").read_text().splitlines()
    assert lines[0] == "id,x,y,z"
    assert len(lines) == 1 + 2 * len(quads)


def test_classify_hex(tmp_path, capsys):
    ang = np.deg2rad([0.0, 120.0, 240.0])
    b = np.column_stack([np.cos(ang), np.sin(ang), np.zeros(3)])
    tw = ang + np.deg2rad(15.0)
    t = np.column_stack([np.cos(tw), np.sin(tw), np.ones(3)])
    pts = np.array([b[0], t[1], b[2], t[0], b[1], t[2]])
    f = tmp_path / "hex.json"
    f.write_text(json.dumps(pts.tolist()))
    code, out, _ = run_main(capsys, "classify-hex", str(f))
    assert code == EXIT_OK
    assert json.loads(out)["payload"]["kind"] in ("TrefoilLeft", "TrefoilRight")
    g = tmp_path / "bad.json"
    g.write_text(json.dumps(pts[:5].tolist()))
    code, _, err = run_main(capsys, "classify-hex", str(g))
    assert code == EXIT_INPUT and "six" in err


def test_input_errors(tmp_path, capsys):
    assert run_main(capsys, "search", "--curve", "no-such-curve")[0] == EXIT_INPUT
    assert run_main(capsys, "search", "--spec", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"ambient": "R4", "coefficients": []}))
    assert run_main(capsys, "search", "--spec", str(bad))[0] == EXIT_INPUT
    assert run_main(capsys, "search", "--curve", "paper-trefoil-s3", "--grid", "3")[0] == EXIT_INPUT
    assert run_main(capsys, "search", "--curve", "paper-trefoil-s3", "--tol", "-1")[0] == EXIT_INPUT


def test_run_config_validation():
    with pytest.raises(InputError):
        RunConfig("thickness", "x", grid=2)
    with pytest.raises(InputError):
        RunConfig("search", "x", grid=5)
    RunConfig("thickness", "x", grid=4)


def test_spec_file_round_trip(tmp_path, capsys):
    spec = tmp_path / "curve.json"
    spec.write_text(json.dumps(preset("paper-trefoil-s3").to_spec()))
    out = tmp_path / "doc.json"
    code, _, _ = run_main(capsys, "search", "--spec", str(spec), "--grid", "6", "--out", str(out))
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["config"]["source"].startswith("spec:")
    assert len(doc["payload"]["runs"][0]["solutions"]) == 1


def test_timings_optional(capsys):
    _, out, _ = run_main(capsys, "search", "--curve", "paper-trefoil-s3", "--grid", "6", "--timings")
    assert json.loads(out)["timings"]["total_s"] >= 0
    _, out, _ = run_main(capsys, "search", "--curve", "paper-trefoil-s3", "--grid", "6")
    assert "timings" not in json.loads(out)


def test_documents_finite_and_valid(search_doc, certify_doc):
    for doc, _ in (search_doc, certify_doc):
        text = dumps(doc)
        assert "NaN" not in text and "Infinity" not in text
        jsonschema.validate(json.loads(text), load_schema("result"))


def test_plot_export(certify_doc, tmp_path):
    doc, _ = certify_doc
    paths = export_plot_data(doc, tmp_path / "a")
    names = sorted(p.name for p in paths)
    assert names == ["curve.csv", "hexagon.csv"]
    curve_rows = (tmp_path / "a" / "curve.csv").read_text().splitlines()
    hex_rows = (tmp_path / "a" / "hexagon.csv").read_text().splitlines()
    assert len(curve_rows) == 1 + 1024
    assert len(hex_rows) == 1 + 7
    assert hex_rows[1] == hex_rows[-1]
    export_plot_data(doc, tmp_path / "b")
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_console_script_help():
    res = subprocess.run(
        [sys.executable, "-m", "inscribed_trefoil.cli", "--help"], capture_output=True, text=True, check=False
    )
    assert res.returncode == 0
    for name in ("search", "invariant", "thickness", "certify", "quadrisecants", "classify-hex"):
        assert name in res.stdout
