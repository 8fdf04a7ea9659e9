"""plotkit command line: render figures from experiment CSVs.

    plotkit render --spec spec.json
    plotkit render --preset fig2 --in results/ --out figures/

Presets: fig2 (three risk panels), figA1/figA2/figA3 (bias/variance panels
for the two start points), decay (step plot of decay_table.csv).
"""

from __future__ import annotations

import argparse
import os
import sys

from .csvdata import CsvFormatError
from .render import FigureSpec, load_spec, render

_PRESETS = {
    "fig2": ("risk", ("fig2a.csv", "fig2b.csv", "fig2c.csv"),
             ("start 10*e_1", "start 10*e_2", "start 10*e_20")),
    "figA1": ("decomposition", ("figA1a.csv", "figA1b.csv"),
              ("start 10*e_1", "start 10*e_10")),
    "figA2": ("decomposition", ("figA2a.csv", "figA2b.csv"),
              ("start 10*e_1", "start 10*e_10")),
    "figA3": ("decomposition", ("figA3a.csv", "figA3b.csv"),
              ("start 10*e_1", "start 10*e_10")),
    "decay": ("decay", ("decay_table.csv",), ()),
}


def preset_spec(name: str, in_dir: str, out_dir: str) -> FigureSpec:
    if name not in _PRESETS:
        raise CsvFormatError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}")
    kind, files, titles = _PRESETS[name]
    return FigureSpec(kind=kind,
                      inputs=tuple(os.path.join(in_dir, f) for f in files),
                      output=os.path.join(out_dir, name), titles=titles)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plotkit")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("render", help="render a figure spec or preset")
    sp.add_argument("--spec", help="JSON figure spec")
    sp.add_argument("--preset", choices=sorted(_PRESETS))
    sp.add_argument("--in", dest="in_dir", default="results")
    sp.add_argument("--out", dest="out_dir", default="figures")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.spec:
            spec = load_spec(args.spec)
        elif args.preset:
            spec = preset_spec(args.preset, args.in_dir, args.out_dir)
        else:
            print("error: provide --spec or --preset", file=sys.stderr)
            return 2
        for path in render(spec):
            print(f"wrote {path}")
        return 0
    except (CsvFormatError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
