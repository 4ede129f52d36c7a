"""Render figure specs over exported CSV artifacts.

A figure spec is a JSON object:

    {
      "output": "figure.png",
      "rows": 1, "cols": 3,
      "title": "...",                      # optional
      "panels": [
        {"kind": "curves", "title": "...",
         "curves": [
           {"csv": "path.csv", "curve": "initial", "role": "state",
            "label": "state cdf"},
           ...
         ]},
        {"kind": "heatmap", "csv": "grid.csv",
         "x": "mean", "y": "stddev", "value": "residual"}
      ]
    }

Curve CSVs carry the header ``curve,grid_x,value``; heatmap CSVs are
column-named tables.  Styling is fixed by role: state measures render as
dashed cyan, references as solid red.  Rendering does no numerical work
beyond axis scaling, and output bytes are deterministic for identical
inputs.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["RenderError", "load_curve", "load_table", "render", "render_spec_file"]

_ROLE_STYLE = {
    "state": {"color": "c", "linestyle": "--", "linewidth": 1.8},
    "reference": {"color": "r", "linestyle": "-", "linewidth": 1.5},
}
_CURVE_HEADER = ["curve", "grid_x", "value"]


class RenderError(ValueError):
    """Spec or input-file problem, with the offending file/field named."""


def _read_rows(path: str) -> tuple[list[str], list[dict[str, str]]]:
    if not os.path.exists(path):
        raise RenderError(f"{path}: file does not exist")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise RenderError(f"{path}: empty file, expected a CSV header")
        return list(reader.fieldnames), list(reader)


def load_curve(path: str, curve: str) -> tuple[list[float], list[float]]:
    """Grid/value arrays for one named curve from a cdf-grid CSV."""
    header, rows = _read_rows(path)
    for column in _CURVE_HEADER:
        if column not in header:
            raise RenderError(f"{path}: missing column {column!r}")
    xs: list[float] = []
    ys: list[float] = []
    for row in rows:
        if row["curve"] == curve:
            xs.append(float(row["grid_x"]))
            ys.append(float(row["value"]))
    if not xs:
        raise RenderError(f"{path}: no rows for curve {curve!r}")
    return xs, ys


def load_table(path: str, columns: list[str]) -> dict[str, list[str]]:
    """Named columns from a CSV table."""
    header, rows = _read_rows(path)
    for column in columns:
        if column not in header:
            raise RenderError(f"{path}: missing column {column!r}")
    return {c: [row[c] for row in rows] for c in columns}


def _require(spec: dict, key: str, where: str) -> Any:
    if key not in spec:
        raise RenderError(f"{where}: missing field {key!r}")
    return spec[key]


def _render_curves(ax, panel: dict, base_dir: str, where: str) -> None:
    for i, entry in enumerate(_require(panel, "curves", where)):
        cwhere = f"{where}.curves[{i}]"
        path = os.path.join(base_dir, _require(entry, "csv", cwhere))
        name = _require(entry, "curve", cwhere)
        role = entry.get("role", "state")
        if role not in _ROLE_STYLE:
            raise RenderError(f"{cwhere}: unknown role {role!r}")
        xs, ys = load_curve(path, name)
        ax.plot(xs, ys, label=entry.get("label", name), **_ROLE_STYLE[role])
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)


def _render_heatmap(ax, panel: dict, base_dir: str, where: str) -> None:
    path = os.path.join(base_dir, _require(panel, "csv", where))
    x_col = _require(panel, "x", where)
    y_col = _require(panel, "y", where)
    v_col = _require(panel, "value", where)
    table = load_table(path, [x_col, y_col, v_col])
    xs = sorted({float(v) for v in table[x_col]})
    ys = sorted({float(v) for v in table[y_col]})
    x_index = {v: i for i, v in enumerate(xs)}
    y_index = {v: i for i, v in enumerate(ys)}
    values = [[float("nan")] * len(xs) for _ in ys]
    for x_raw, y_raw, v_raw in zip(table[x_col], table[y_col], table[v_col]):
        values[y_index[float(y_raw)]][x_index[float(x_raw)]] = float(v_raw)
    extent = None
    if len(xs) > 1 or len(ys) > 1:
        extent = [xs[0], xs[-1], ys[0], ys[-1]]
    image = ax.imshow(
        values, origin="lower", aspect="auto", cmap="viridis", extent=extent
    )
    ax.figure.colorbar(image, ax=ax, label=v_col)
    ax.set_xlabel(x_col)
    ax.set_ylabel(y_col)


def render(spec: dict, base_dir: str = ".") -> str:
    """Render one spec to its output PNG; returns the written path."""
    rows = int(_require(spec, "rows", "spec"))
    cols = int(_require(spec, "cols", "spec"))
    panels = _require(spec, "panels", "spec")
    if len(panels) > rows * cols:
        raise RenderError(
            f"spec: {len(panels)} panels do not fit a {rows}x{cols} layout"
        )
    fig, axes = plt.subplots(
        rows, cols, figsize=(4.0 * cols, 3.0 * rows), squeeze=False, dpi=100
    )
    for i, panel in enumerate(panels):
        ax = axes[i // cols][i % cols]
        where = f"spec.panels[{i}]"
        kind = panel.get("kind", "curves")
        if kind == "curves":
            _render_curves(ax, panel, base_dir, where)
        elif kind == "heatmap":
            _render_heatmap(ax, panel, base_dir, where)
        else:
            raise RenderError(f"{where}: unknown panel kind {kind!r}")
        if "title" in panel:
            ax.set_title(panel["title"], fontsize=10)
        ax.set_xlabel(panel.get("xlabel", "x"))
    for i in range(len(panels), rows * cols):
        axes[i // cols][i % cols].axis("off")
    if "title" in spec:
        fig.suptitle(spec["title"])
    fig.tight_layout()
    output = os.path.join(base_dir, _require(spec, "output", "spec"))
    os.makedirs(os.path.dirname(output) or ".", exist_ok=True)
    fig.savefig(output, metadata={"Software": "figviz"})
    plt.close(fig)
    return output


def render_spec_file(path: str) -> str:
    """Render a spec JSON file, resolving csv/output paths beside it."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RenderError(f"{path}: not valid JSON: {exc}") from exc
    return render(spec, base_dir=os.path.dirname(os.path.abspath(path)))
