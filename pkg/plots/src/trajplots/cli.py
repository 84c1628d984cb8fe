"""Command line: ``plot <kind> --in <csv...> --out <img>``."""

from __future__ import annotations

import argparse
import sys

from trajplots.render import KINDS, PlotJob, render


def _parse_markers(spec: str):
    if not spec:
        return ()
    out = []
    for pair in spec.split(";"):
        x, y = pair.split(",")
        out.append((float(x), float(y)))
    return tuple(out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="render figures from simulation CSV logs"
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--x", default="time_s")
    parser.add_argument("--y", default="x_true_x")
    parser.add_argument("--band-lo", default="")
    parser.add_argument("--band-hi", default="")
    parser.add_argument("--labels", default="")
    parser.add_argument("--safe-lo", type=float, default=None)
    parser.add_argument("--safe-hi", type=float, default=None)
    parser.add_argument(
        "--markers",
        default="",
        help="semicolon-separated x,y pairs; use the = form when the first "
        "coordinate is negative, e.g. --markers=-5,-5;5,-5;5,5",
    )
    parser.add_argument("--title", default="")
    parser.add_argument("--log-scale", action="store_true")
    parser.add_argument("--reference", default="")
    args = parser.parse_args(argv)

    job = PlotJob(
        kind=args.kind,
        inputs=tuple(args.inputs),
        out=args.out,
        x=args.x,
        y=args.y,
        band_lo=args.band_lo,
        band_hi=args.band_hi,
        labels=tuple(s for s in args.labels.split(",") if s),
        safe_lo=args.safe_lo,
        safe_hi=args.safe_hi,
        markers=_parse_markers(args.markers),
        title=args.title,
        log_scale=args.log_scale,
        reference=args.reference,
    )
    try:
        render(job)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
