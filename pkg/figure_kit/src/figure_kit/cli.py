"""figure_kit command line: figure_kit <kind> <csv> -o <img> [--zoom t1 t2]"""

import argparse
import sys

from .plots import KIND_COLUMNS, PlotSpec, SchemaMismatchError, plot


def build_parser():
    parser = argparse.ArgumentParser(
        prog="figure_kit",
        description="Render figures from gondola-gnc trace CSVs.")
    parser.add_argument("kind", choices=sorted(KIND_COLUMNS))
    parser.add_argument("csv", help="input trace CSV")
    parser.add_argument("-o", "--out", required=True, help="output image path")
    parser.add_argument("--zoom", nargs=2, type=float, metavar=("T1", "T2"),
                        help="inset window for the tracking kind")
    parser.add_argument("--log", action="store_true",
                        help="log-scale error axis for the mekf-error kind")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    spec = PlotSpec(csv_path=args.csv, kind=args.kind, out_path=args.out,
                    zoom=tuple(args.zoom) if args.zoom else None,
                    log_scale=args.log)
    try:
        plot(spec)
    except SchemaMismatchError as exc:
        print(f"error: SchemaMismatch: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
