import csv
import io
import json

import pytest

from cadeval.cli import app
from cadeval.geometry import mesh_volume
from cadeval.services import ModelService


def test_complexity_json(runner, fixture_paths, tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(
        app, ["--out", str(out), "complexity", str(fixture_paths["model_d"])]
    )
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["display"]["generated.surface"] == "0.355556"
    assert data["generated"]["genus"] == 1


def test_compare_csv(runner, fixture_paths, tmp_path):
    out = tmp_path / "report.csv"
    args = [
        "--format",
        "csv",
        "--out",
        str(out),
        "compare",
        str(fixture_paths["model_c"]),
        str(fixture_paths["model_d"]),
    ]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    rows = {r["metric"]: r for r in csv.DictReader(io.StringIO(out.read_text()))}
    assert rows["similarity.volumetric"]["display"] == "1.0000"
    assert rows["similarity.hausdorff"]["display"] == "22.3607"


def test_compare_to_stdout(runner, fixture_paths):
    truth = str(fixture_paths["model_d"])
    result = runner.invoke(app, ["compare", truth, truth])
    assert result.exit_code == 0
    assert '"schema_version": "1.0"' in result.output


def test_repro_table1(runner, tmp_path):
    out = tmp_path / "table1.md"
    result = runner.invoke(app, ["--out", str(out), "repro-table1"])
    assert result.exit_code == 0, result.output
    text = out.read_text()
    assert "| 3 Views |" in text
    assert "| Code |" in text
    assert "MISMATCH" not in text


def test_repro_table1_mismatch_exit_code(runner, tmp_path):
    out = tmp_path / "table1.json"
    args = [
        "--weights-similarity",
        "0.2,0.2,0.2,0.2,0.2",
        "--format",
        "json",
        "--out",
        str(out),
        "repro-table1",
    ]
    result = runner.invoke(app, args)
    assert result.exit_code == 1
    assert json.loads(out.read_text())["passed"] is False


def test_trend_fixtures(runner, fixture_paths, tmp_path):
    out = tmp_path / "trend.csv"
    svg = tmp_path / "trend.svg"
    args = [
        "--out",
        str(out),
        "trend",
        "--fixtures",
        "--svg",
        str(svg),
        str(fixture_paths["model_d"]),
    ]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert [row[0] for row in rows[1:]] == [
        "3 Views",
        "Isometric",
        "Geometric Structure",
        "Code",
    ]
    assert svg.read_text().count("<polyline") == 4


def test_trend_labelled_models(runner, fixture_paths, tmp_path):
    out = tmp_path / "trend.json"
    args = [
        "--format",
        "json",
        "--out",
        str(out),
        "trend",
        "-m",
        f"v1={fixture_paths['model_a']}",
        "-m",
        f"v2={fixture_paths['model_c']}",
        str(fixture_paths["model_d"]),
    ]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert [p["label"] for p in data["points"]] == ["v1", "v2"]


def test_trend_errors(runner, fixture_paths):
    truth = str(fixture_paths["model_d"])
    result = runner.invoke(app, ["trend", "-m", "no-separator", truth])
    assert result.exit_code == 2
    assert "LABEL=PATH" in result.output
    model = f"v1={fixture_paths['model_a']}"
    result = runner.invoke(app, ["trend", "-m", model, "-m", model, truth])
    assert result.exit_code == 2
    assert "Duplicate" in result.output


def test_scad2stl(runner, fixture_paths, tmp_path):
    out = tmp_path / "model_b.stl"
    result = runner.invoke(
        app, ["scad2stl", "--ascii", str(fixture_paths["model_b"]), str(out)]
    )
    assert result.exit_code == 0, result.output
    assert out.read_bytes().startswith(b"solid model_b")
    mesh = ModelService().load(out).mesh
    assert mesh_volume(mesh) == pytest.approx(23000.0)


def test_missing_input(runner, tmp_path):
    result = runner.invoke(app, ["complexity", str(tmp_path / "absent.stl")])
    assert result.exit_code == 2
    assert "not found" in result.output


def test_unsupported_construct(runner, tmp_path):
    model = tmp_path / "round.scad"
    model.write_text("sphere(r = 5);\n")
    result = runner.invoke(app, ["complexity", str(model)])
    assert result.exit_code == 2
    assert "line 1" in result.output


def test_bad_weights(runner, fixture_paths):
    result = runner.invoke(
        app,
        ["--weights-complexity", "1,2", "complexity", str(fixture_paths["model_d"])],
    )
    assert result.exit_code == 2
    assert "Expected 3" in result.output


def test_config_file(runner, fixture_paths, tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"complexity_weights": [0, 0, 1]}))
    out = tmp_path / "report.json"
    args = [
        "--config",
        str(config_file),
        "--out",
        str(out),
        "complexity",
        str(fixture_paths["model_b"]),
    ]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text())["generated"]["composite"] == -2


def test_bad_config_file(runner, fixture_paths, tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text("[1, 2]")
    result = runner.invoke(
        app,
        ["--config", str(config_file), "complexity", str(fixture_paths["model_d"])],
    )
    assert result.exit_code == 2


def test_trend_markdown(runner, fixture_paths):
    args = ["--format", "md", "trend", "--fixtures", str(fixture_paths["model_d"])]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    assert result.output.startswith("# Similarity trend")
    assert "| Code | 1.0000 |" in result.output
    assert "label,final" not in result.output


def test_fit_weights(runner, tmp_path):
    out = tmp_path / "weights.json"
    result = runner.invoke(app, ["--out", str(out), "fit-weights"])
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["source"] == "published"
    expected = [0.25, 0.25, 0.20, 0.15, 0.15]
    assert data["weights"] == pytest.approx(expected, abs=0.002)
    assert data["max_residual"] <= 5e-4


def test_fit_weights_free_markdown(runner):
    result = runner.invoke(app, ["--format", "md", "fit-weights", "--free"])
    assert result.exit_code == 0, result.output
    assert "# Fitted similarity weights" in result.output
    assert "Rank 4" in result.output


def test_fit_weights_missing_rows(runner, tmp_path):
    result = runner.invoke(app, ["fit-weights", str(tmp_path / "absent.csv")])
    assert result.exit_code == 2
    assert "not found" in result.output


def test_unwritable_out_is_an_input_error(runner, fixture_paths, tmp_path):
    args = ["--out", str(tmp_path), "complexity", str(fixture_paths["model_d"])]
    result = runner.invoke(app, args)
    assert result.exit_code == 2
    assert "Error:" in result.output
    assert isinstance(result.exception, SystemExit)


def test_unwritable_svg_is_an_input_error(runner, fixture_paths, tmp_path):
    args = [
        "--out",
        str(tmp_path / "trend.csv"),
        "trend",
        "--fixtures",
        "--svg",
        str(tmp_path),
        str(fixture_paths["model_d"]),
    ]
    result = runner.invoke(app, args)
    assert result.exit_code == 2
    assert "Error:" in result.output
    assert isinstance(result.exception, SystemExit)


def test_tiny_weld_tolerance_is_rejected(runner, fixture_paths):
    args = ["--weld-tol", "1e-320", "complexity", str(fixture_paths["model_d"])]
    result = runner.invoke(app, args)
    assert result.exit_code == 2
    assert "weld_tolerance" in result.output
    assert isinstance(result.exception, SystemExit)
