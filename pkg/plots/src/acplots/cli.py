"""ac-plots <kind> --in <artifact> [--in ...] --out <figure>"""

from __future__ import annotations

import argparse
import sys

from acplots.render import FIGURE_KINDS, FigureSpec, ParseError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ac-plots", description="render laboratory artifacts")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="input artifact (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default=None)
    parser.add_argument("--style-seed", type=int, default=0)
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.inputs, output=args.out,
                          title=args.title, style_seed=args.style_seed)
        path = render(spec)
    except (ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
