#!/usr/bin/env python3
"""Run every bundled scenario end to end and collect the artifacts.

Usage: python scripts/run_examples.py [outdir]

Exports verification/synthesis reports, traces, the feasibility grid,
simulation reports, and figure data under <outdir> (default: out/).
Exit code 2 from a subcommand means a certificate was emitted; that is the
expected outcome for the bounded-control scenarios and is reported, not
treated as a failure.
"""

from __future__ import annotations

import json
import pathlib
import sys

from mreach.cli import run

RUNS = [
    ("verify", "sv_a_nonrandom"),
    ("synthesize", "sv_a_nonrandom"),
    ("simulate", "sv_a_nonrandom"),
    ("export-figures", "sv_a_nonrandom"),
    ("verify", "sv_b_random"),
    ("synthesize", "sv_b_random"),
    ("simulate", "sv_b_random"),
    ("export-figures", "sv_b_random"),
    ("verify", "sv_a_noisefree"),
    ("simulate", "sv_a_noisefree"),
    ("feasible-set", "sv_a_noisefree_grid"),
]


def main() -> int:
    base = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "out")
    for command, name in RUNS:
        out = base / name / command.replace("-", "_")
        out.mkdir(parents=True, exist_ok=True)
        code = run(command, name, str(out))
        status = {0: "ok", 2: "certificate"}.get(code, f"exit {code}")
        print(f"{name:22s} {command:15s} -> {status:12s} ({out})")
        if code not in (0, 2):
            return code
        report = out / "verify_report.json"
        if report.exists():
            payload = json.loads(report.read_text())
            cert = payload.get("certificate")
            if cert:
                print(
                    f"{'':22s} certificate: {cert['kind']} at step {cert['step']}, "
                    f"residual {cert['residual']:.6g}"
                )
    print(f"\nartifacts under {base}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
