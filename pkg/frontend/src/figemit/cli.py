"""figures: render simulation data products to PNG.

    figures --manifest <path> --kind <kind> --out <file> [options]

Exit codes: 0 success, 2 argument error, 3 render error (missing product,
axis mismatch).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .products import AxisMismatch, MissingProduct, load_manifest
from .render import KINDS, FigureRequest, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="figures",
                                description="render tunnelkit data products")
    p.add_argument("--manifest", required=True, help="manifest.tsv of a run")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--product", default="", help="explicit product name")
    p.add_argument("--colormap", default="")
    p.add_argument("--clamp", nargs=2, type=float, default=None,
                   metavar=("VMIN", "VMAX"))
    p.add_argument("--log-floor", type=float, default=1e-12)
    p.add_argument("--times", nargs="*", type=float, default=None,
                   help="phasespace_panel: snapshot times to render")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        req = FigureRequest(kind=args.kind, manifest=Path(args.manifest),
                            out=Path(args.out), product=args.product,
                            colormap=args.colormap,
                            clamp=tuple(args.clamp) if args.clamp else (),
                            log_floor=args.log_floor,
                            times=tuple(args.times) if args.times else ())
    except ValueError as exc:
        print(f"argument error: {exc}", file=sys.stderr)
        return 2
    try:
        man = load_manifest(req.manifest)
        outputs = render(req, man)
    except (MissingProduct, AxisMismatch) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    for out in outputs:
        print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
