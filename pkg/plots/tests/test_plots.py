"""Rendering from golden fixtures: every kind, byte-reproducibly."""

import json
import os
import shutil
from importlib.metadata import version
from pathlib import Path

import pytest

from avgeuler_plots import FigureSpec, SchemaError, cli, render

FIXTURES = Path(__file__).parent / "fixtures"

SPECS = {
    "conservation": {"conservation": "conservation.csv"},
    "invariance": {"moments": "invariance_moments.csv"},
    "density": {"density": "density.csv", "histogram": "energy_histogram.csv"},
    "recurrence": {"distances": "distances.jsonl",
                   "report": "recurrence_report.json"},
    "convergence": {"convergence": "convergence.csv"},
}

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def make_spec(kind, tmp_path, name="fig.png", style=None, inputs=None):
    paths = {role: str(FIXTURES / fname)
             for role, fname in (inputs or SPECS[kind]).items()}
    return FigureSpec(kind=kind, inputs=paths, output=str(tmp_path / name),
                      style=style or {})


@pytest.mark.parametrize("kind", sorted(SPECS))
def test_each_kind_renders(kind, tmp_path):
    out = render(make_spec(kind, tmp_path))
    data = Path(out).read_bytes()
    assert data[:8] == PNG_MAGIC
    assert len(data) > 5000


@pytest.mark.parametrize("kind", sorted(SPECS))
def test_renders_byte_reproducibly(kind, tmp_path):
    first = Path(render(make_spec(kind, tmp_path, "a.png")))
    blob = first.read_bytes()
    # delete and re-render: identical bytes
    first.unlink()
    again = Path(render(make_spec(kind, tmp_path, "a.png"))).read_bytes()
    assert again == blob
    # render to a second path: also identical
    other = Path(render(make_spec(kind, tmp_path, "b.png"))).read_bytes()
    assert other == blob


def test_lockfile_matches_installed_versions():
    lock = Path(__file__).parents[1] / "requirements.lock"
    pins = [line.split("==") for line in lock.read_text().splitlines()
            if line and not line.startswith("#")]
    assert pins, "lockfile must pin the rendering stack"
    mismatches = [f"{name}: locked {want}, installed {version(name)}"
                  for name, want in pins if version(name) != want]
    assert not mismatches, (
        "byte-reproducibility is only claimed under the locked versions; "
        + "; ".join(mismatches))


def test_style_options_change_output(tmp_path):
    plain = Path(render(make_spec("density", tmp_path, "p.png"))).read_bytes()
    styled = Path(render(make_spec(
        "density", tmp_path, "s.png",
        style={"title": "energy density", "dpi": 72, "grid": False,
               "figsize": [5, 3]}))).read_bytes()
    assert styled[:8] == PNG_MAGIC
    assert styled != plain


def test_density_renders_without_histogram(tmp_path):
    spec = make_spec("density", tmp_path, inputs={"density": "density.csv"})
    assert Path(render(spec)).read_bytes()[:8] == PNG_MAGIC


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------

def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown figure kind"):
        FigureSpec(kind="scatter", inputs={}, output=str(tmp_path / "x.png"))


def test_missing_required_role(tmp_path):
    with pytest.raises(ValueError, match="needs an input path"):
        FigureSpec(kind="recurrence",
                   inputs={"distances": str(FIXTURES / "distances.jsonl")},
                   output=str(tmp_path / "x.png"))


def test_unknown_role_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown input role"):
        make_spec("density", tmp_path,
                  inputs={"density": "density.csv", "extra": "density.csv"})


def test_missing_input_file(tmp_path):
    with pytest.raises(ValueError, match="does not exist"):
        FigureSpec(kind="density",
                   inputs={"density": str(tmp_path / "absent.csv")},
                   output=str(tmp_path / "x.png"))


def test_unwritable_output_dir(tmp_path):
    with pytest.raises(ValueError, match="output directory"):
        make_spec("density", tmp_path, name="sub/dir/x.png")


def test_unknown_style_option(tmp_path):
    with pytest.raises(ValueError, match="unknown style option"):
        make_spec("density", tmp_path, style={"colour": "red"})


def test_spec_from_json_roundtrip(tmp_path):
    payload = {"kind": "conservation",
               "inputs": {"conservation": str(FIXTURES / "conservation.csv")},
               "output": str(tmp_path / "x.png"),
               "style": {"dpi": 72}}
    spec = FigureSpec.from_json(json.dumps(payload))
    assert spec.kind == "conservation"
    with pytest.raises(ValueError, match="missing 'output'"):
        FigureSpec.from_json(json.dumps({"kind": "density", "inputs": {}}))
    with pytest.raises(ValueError, match="unknown figure spec keys"):
        FigureSpec.from_json(json.dumps(dict(payload, extra=1)))


# ---------------------------------------------------------------------------
# Schema mismatches name the offending column
# ---------------------------------------------------------------------------

def _copy_without_column(src, dst, column):
    lines = Path(src).read_text().splitlines()
    names = lines[0].split(",")
    idx = names.index(column)
    out = []
    for line in lines:
        cells = line.split(",")
        del cells[idx]
        out.append(",".join(cells))
    Path(dst).write_text("\n".join(out) + "\n")


def test_missing_column_named_in_error(tmp_path):
    broken = tmp_path / "conservation.csv"
    _copy_without_column(FIXTURES / "conservation.csv", broken,
                         "rel_enstrophy_drift")
    spec = FigureSpec(kind="conservation",
                      inputs={"conservation": str(broken)},
                      output=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError, match="'rel_enstrophy_drift'") as err:
        render(spec)
    assert "conservation.csv" in str(err.value)


def test_non_numeric_cell_named_in_error(tmp_path):
    lines = (FIXTURES / "density.csv").read_text().splitlines()
    lines[3] = lines[3].rsplit(",", 1)[0] + ",not-a-number"
    broken = tmp_path / "density.csv"
    broken.write_text("\n".join(lines) + "\n")
    spec = FigureSpec(kind="density", inputs={"density": str(broken)},
                      output=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError, match="column 'rho'.*row 3"):
        render(spec)


def test_jsonl_missing_key_named_in_error(tmp_path):
    lines = (FIXTURES / "distances.jsonl").read_text().splitlines()
    row = json.loads(lines[5])
    del row["dist_sq"]
    lines[5] = json.dumps(row)
    broken = tmp_path / "distances.jsonl"
    broken.write_text("\n".join(lines) + "\n")
    spec = FigureSpec(
        kind="recurrence",
        inputs={"distances": str(broken),
                "report": str(FIXTURES / "recurrence_report.json")},
        output=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError, match="line 6 is missing key 'dist_sq'"):
        render(spec)


def test_report_missing_field_named_in_error(tmp_path):
    doc = json.loads((FIXTURES / "recurrence_report.json").read_text())
    del doc["results"]["epsilon"]
    broken = tmp_path / "report.json"
    broken.write_text(json.dumps(doc))
    spec = FigureSpec(
        kind="recurrence",
        inputs={"distances": str(FIXTURES / "distances.jsonl"),
                "report": str(broken)},
        output=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError, match="'results.epsilon'"):
        render(spec)


def test_empty_csv_rejected(tmp_path):
    broken = tmp_path / "convergence.csv"
    broken.write_text("n_small,estimate,standard_error\n")
    spec = FigureSpec(kind="convergence",
                      inputs={"convergence": str(broken)},
                      output=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError, match="no data rows"):
        render(spec)


# ---------------------------------------------------------------------------
# Script entry
# ---------------------------------------------------------------------------

def test_cli_renders_from_spec_file(tmp_path, capsys):
    payload = {"kind": "invariance",
               "inputs": {"moments": str(FIXTURES / "invariance_moments.csv")},
               "output": str(tmp_path / "fig.png")}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(payload))
    assert cli(["--spec", str(spec_path)]) == 0
    assert (tmp_path / "fig.png").read_bytes()[:8] == PNG_MAGIC
    assert str(tmp_path / "fig.png") in capsys.readouterr().out


def test_cli_reports_schema_error(tmp_path, capsys):
    broken = tmp_path / "convergence.csv"
    shutil.copy(FIXTURES / "convergence.csv", broken)
    _copy_without_column(FIXTURES / "convergence.csv", broken, "estimate")
    payload = {"kind": "convergence",
               "inputs": {"convergence": str(broken)},
               "output": str(tmp_path / "fig.png")}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(payload))
    assert cli(["--spec", str(spec_path)]) == 1
    assert "'estimate'" in capsys.readouterr().err


def test_cli_usage_errors(tmp_path):
    assert cli([]) == 1
    assert cli(["--spec", str(tmp_path / "absent.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli(["--spec", str(bad)]) == 1
