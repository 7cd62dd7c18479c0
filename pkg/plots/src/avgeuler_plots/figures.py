"""Figure rendering from avgeuler CSV/JSONL artifacts.

Rendering is a pure function of the input files: no science is recomputed,
only tables are read and drawn.  Outputs are PNG; with library versions
pinned (see requirements.lock) re-rendering reproduces files byte for byte.
Schema problems are reported with the offending file and column.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

KINDS = ("conservation", "invariance", "density", "recurrence", "convergence")

# input roles per kind: role -> (required, file format)
_INPUT_ROLES = {
    "conservation": {"conservation": (True, "csv")},
    "invariance": {"moments": (True, "csv")},
    "density": {"density": (True, "csv"), "histogram": (False, "csv")},
    "recurrence": {"distances": (True, "jsonl"), "report": (True, "json")},
    "convergence": {"convergence": (True, "csv")},
}

_STYLE_DEFAULTS = {
    "title": None,       # str
    "dpi": 100,          # int
    "figsize": (6.4, 4.8),
    "grid": True,
}

# deterministic PNG metadata: matplotlib would otherwise stamp its version
_METADATA = {"Software": "avgeuler-plots"}


class SchemaError(ValueError):
    """An input file does not match the expected column layout."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input paths by role, figure kind, output path, style."""

    kind: str
    inputs: dict
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        roles = _INPUT_ROLES[self.kind]
        for role in self.inputs:
            if role not in roles:
                raise ValueError(
                    f"unknown input role {role!r} for kind {self.kind!r}; "
                    f"expected from {tuple(roles)}")
        for role, (required, _) in roles.items():
            if required and role not in self.inputs:
                raise ValueError(
                    f"kind {self.kind!r} needs an input path for role "
                    f"{role!r}")
        for role, path in self.inputs.items():
            if not os.path.isfile(path):
                raise ValueError(f"input {role!r} does not exist: {path}")
        out_dir = os.path.dirname(os.path.abspath(self.output)) or "."
        if not os.path.isdir(out_dir):
            raise ValueError(f"output directory does not exist: {out_dir}")
        if not os.access(out_dir, os.W_OK):
            raise ValueError(f"output directory is not writable: {out_dir}")
        for key in self.style:
            if key not in _STYLE_DEFAULTS:
                raise ValueError(
                    f"unknown style option {key!r}; expected from "
                    f"{tuple(_STYLE_DEFAULTS)}")

    @classmethod
    def from_json(cls, text: str) -> "FigureSpec":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("figure spec must be a JSON object")
        unknown = set(raw) - {"kind", "inputs", "output", "style"}
        if unknown:
            raise ValueError(f"unknown figure spec keys: {sorted(unknown)}")
        for needed in ("kind", "inputs", "output"):
            if needed not in raw:
                raise ValueError(f"figure spec is missing {needed!r}")
        return cls(kind=raw["kind"], inputs=dict(raw["inputs"]),
                   output=raw["output"], style=dict(raw.get("style", {})))

    def style_value(self, key: str):
        return self.style.get(key, _STYLE_DEFAULTS[key])


# ---------------------------------------------------------------------------
# Input parsing with column-level diagnostics
# ---------------------------------------------------------------------------

def read_columns(path: str, required: tuple) -> dict:
    """Read a CSV into float arrays, verifying the required columns exist."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        for col in required:
            if col not in names:
                raise SchemaError(f"{path}: missing required column {col!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out = {}
    for col in required:
        values = []
        for i, row in enumerate(rows):
            cell = row[col]
            try:
                values.append(float(cell))
            except (TypeError, ValueError):
                raise SchemaError(
                    f"{path}: column {col!r} has non-numeric value {cell!r} "
                    f"in data row {i + 1}") from None
        out[col] = np.asarray(values)
    return out


def read_jsonl(path: str, required: tuple) -> dict:
    """Read a JSONL series into float arrays, verifying keys per line."""
    out = {col: [] for col in required}
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: line {i + 1} is not JSON: {exc}") \
                    from None
            for col in required:
                if col not in row:
                    raise SchemaError(
                        f"{path}: line {i + 1} is missing key {col!r}")
                out[col].append(float(row[col]))
    if not out[required[0]]:
        raise SchemaError(f"{path}: no data lines")
    return {col: np.asarray(vals) for col, vals in out.items()}


def read_report_field(path: str, *keys: str) -> float:
    """Extract a nested numeric field from a report JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from None
    node = doc
    for key in keys:
        if not isinstance(node, dict) or key not in node:
            raise SchemaError(
                f"{path}: missing required field {'.'.join(keys)!r}")
        node = node[key]
    try:
        return float(node)
    except (TypeError, ValueError):
        raise SchemaError(
            f"{path}: field {'.'.join(keys)!r} is not numeric") from None


# ---------------------------------------------------------------------------
# Renderers (one per kind)
# ---------------------------------------------------------------------------

_LOG_FLOOR = 1e-18  # drift values can be exactly 0 at t=0; clip for log axes


def _draw_conservation(spec: FigureSpec, ax) -> None:
    cols = read_columns(spec.inputs["conservation"],
                        ("t", "rel_energy_drift", "rel_enstrophy_drift"))
    ax.semilogy(cols["t"], np.maximum(cols["rel_energy_drift"], _LOG_FLOOR),
                label="|E(t) - E(0)| / |E(0)|", color="tab:blue")
    ax.semilogy(cols["t"], np.maximum(cols["rel_enstrophy_drift"], _LOG_FLOOR),
                label="|S(t) - S(0)| / |S(0)|", color="tab:orange")
    ax.set_xlabel("t")
    ax.set_ylabel("relative drift")
    ax.legend()


def _draw_invariance(spec: FigureSpec, ax) -> None:
    cols = read_columns(spec.inputs["moments"],
                        ("k1", "k2", "theory_second_moment",
                         "final_second_moment", "final_se"))
    n = cols["k1"].size
    x = np.arange(n)
    ax.bar(x, cols["final_second_moment"], yerr=3.0 * cols["final_se"],
           capsize=3, color="tab:blue", alpha=0.7,
           label="ensemble at t=T (±3 s.e.)")
    ax.plot(x, cols["theory_second_moment"], "k_", markersize=14,
            label="stationary value")
    labels = [f"({int(a)},{int(b)})" for a, b in zip(cols["k1"], cols["k2"])]
    ax.set_xticks(x, labels, rotation=45 if n > 8 else 0)
    ax.set_xlabel("mode")
    ax.set_ylabel("second moment")
    ax.legend()


def _draw_density(spec: FigureSpec, ax) -> None:
    cols = read_columns(spec.inputs["density"], ("r", "rho"))
    if "histogram" in spec.inputs:
        hist = read_columns(spec.inputs["histogram"],
                            ("bin_left", "bin_right", "count"))
        widths = hist["bin_right"] - hist["bin_left"]
        total = float(np.sum(hist["count"]))
        heights = hist["count"] / (total * widths)
        ax.bar(hist["bin_left"], heights, width=widths, align="edge",
               color="tab:orange", alpha=0.5, label="sample histogram")
    ax.plot(cols["r"], cols["rho"], color="tab:blue", label="energy density")
    ax.set_xlabel("r")
    ax.set_ylabel("density")
    ax.legend()


def _draw_recurrence(spec: FigureSpec, ax) -> None:
    series = read_jsonl(spec.inputs["distances"], ("t", "dist_sq"))
    eps = read_report_field(spec.inputs["report"], "results", "epsilon")
    ax.plot(series["t"], series["dist_sq"], color="tab:blue", linewidth=0.8,
            label="squared distance to start")
    ax.axhspan(0.0, eps, color="tab:green", alpha=0.25, label="inner ball")
    ax.axhspan(eps, 2.0 * eps, color="tab:olive", alpha=0.25,
               label="return band")
    ax.set_xlabel("t")
    ax.set_ylabel("squared distance")
    ax.legend()


def _draw_convergence(spec: FigureSpec, ax) -> None:
    cols = read_columns(spec.inputs["convergence"],
                        ("n_small", "estimate", "standard_error"))
    ax.errorbar(cols["n_small"], cols["estimate"],
                yerr=3.0 * cols["standard_error"], fmt="o-",
                color="tab:blue", capsize=3, label="mean squared error ±3 s.e.")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("truncation N")
    ax.set_ylabel("error vs reference")
    ax.legend()


_RENDERERS = {
    "conservation": _draw_conservation,
    "invariance": _draw_invariance,
    "density": _draw_density,
    "recurrence": _draw_recurrence,
    "convergence": _draw_convergence,
}


def render(spec: FigureSpec) -> str:
    """Draw the requested figure and write a PNG; returns the output path."""
    fig, ax = plt.subplots(figsize=tuple(spec.style_value("figsize")))
    try:
        _RENDERERS[spec.kind](spec, ax)
        if spec.style_value("grid"):
            ax.grid(True, alpha=0.3)
        title = spec.style_value("title")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(spec.output, format="png",
                    dpi=float(spec.style_value("dpi")), metadata=_METADATA)
    finally:
        plt.close(fig)
    return spec.output
