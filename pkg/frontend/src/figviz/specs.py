"""Standard figure specs over two scenario export directories.

Builds the four comparison figures: the shrinking-sigma limit of the
initial measure against the tube reference, and the bounded versus
unbounded post-control measure against the target reference, for both a
single-measure export and a mixture export.
"""

from __future__ import annotations

import os

__all__ = ["standard_specs"]

_SIGMAS = ("0.2", "0.05", "0.005")


def _limit_spec(export_dir: str, output: str, label: str) -> dict:
    panels = []
    for sigma in _SIGMAS:
        panels.append({
            "kind": "curves",
            "title": f"sigma = {sigma}",
            "curves": [
                {
                    "csv": os.path.join(export_dir, f"figdata_initial_sigma_{sigma}.csv"),
                    "curve": "initial",
                    "role": "state",
                    "label": f"{label} cdf",
                },
                {
                    "csv": os.path.join(export_dir, "figdata_reference.csv"),
                    "curve": "tube_measure",
                    "role": "reference",
                    "label": "tube membership",
                },
            ],
        })
    return {"output": output, "rows": 1, "cols": 3, "panels": panels}


def _control_spec(export_dir: str, output: str, label: str) -> dict:
    target_ref = {
        "csv": os.path.join(export_dir, "figdata_reference.csv"),
        "curve": "target_measure",
        "role": "reference",
        "label": "target membership",
    }
    return {
        "output": output,
        "rows": 1,
        "cols": 2,
        "panels": [
            {
                "kind": "curves",
                "title": "bounded control",
                "curves": [
                    {
                        "csv": os.path.join(export_dir, "figdata_post_atom.csv"),
                        "curve": "post",
                        "role": "state",
                        "label": f"{label} after control",
                    },
                    target_ref,
                ],
            },
            {
                "kind": "curves",
                "title": "unbounded control",
                "curves": [
                    {
                        "csv": os.path.join(export_dir, "figdata_post_unbounded.csv"),
                        "curve": "post_unbounded",
                        "role": "state",
                        "label": f"{label} after control",
                    },
                    target_ref,
                ],
            },
        ],
    }


def standard_specs(export_a: str, export_b: str, out_dir: str) -> list[dict]:
    """The four standard figures from two export directories."""
    return [
        _limit_spec(export_a, os.path.join(out_dir, "fig_band_limit.png"), "state"),
        _control_spec(export_a, os.path.join(out_dir, "fig_band_control.png"), "state"),
        _limit_spec(export_b, os.path.join(out_dir, "fig_mixture_limit.png"), "mixture"),
        _control_spec(export_b, os.path.join(out_dir, "fig_mixture_control.png"), "mixture"),
    ]
