"""Render command: figures from a JSON jobs manifest.

    gradflow-render render --jobs jobs.json --out figures/

The manifest is a JSON array of jobs:
    [{"kind": "energy_compare", "inputs": ["run.csv"], "output": "e.png"}]
Relative input and output paths resolve against the manifest's directory
and --out respectively.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .figures import FigureJob, render_report
from .formats import SchemaError


def load_jobs(manifest_path: Path, out_dir: Path) -> list[FigureJob]:
    entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    if not isinstance(entries, list):
        raise ValueError("jobs manifest must be a JSON array")
    base = manifest_path.resolve().parent
    jobs = []
    for entry in entries:
        inputs = [
            str(path if (path := Path(p)).is_absolute() else base / path)
            for p in entry["inputs"]
        ]
        output = Path(entry["output"])
        if not output.is_absolute():
            output = out_dir / output
        jobs.append(FigureJob(kind=entry["kind"], inputs=inputs, output=str(output)))
    return jobs


def main(argv: list[str] | None = None) -> int:
    args_in = list(sys.argv[1:] if argv is None else argv)
    if args_in and args_in[0] == "render":
        args_in = args_in[1:]
    parser = argparse.ArgumentParser(prog="gradflow-render", description=__doc__)
    parser.add_argument("--jobs", required=True, help="JSON jobs manifest")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(args_in)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        jobs = load_jobs(Path(args.jobs), out_dir)
        results = render_report(jobs)
    except (SchemaError, ValueError, KeyError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 4
    for output, info in results.items():
        extra = f" ({info})" if info else ""
        print(f"wrote {output}{extra}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
