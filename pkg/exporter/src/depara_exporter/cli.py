"""depara-export command line.

Exit codes: 0 success, 1 runtime (I/O) failure, 2 validation error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import ExportSpec, export
from .models import list_layers


def _floats(raw: str) -> list[float]:
    try:
        return [float(part) for part in raw.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {raw!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depara-export",
        description="Export embeddings and Gradient*Input attributions to a .depb bundle.",
    )
    parser.add_argument("--model", required=True,
                        help="model reference: .depn / .pt / .pth path or torchvision:<name>")
    parser.add_argument("--layer", default=None, help="named module to tap")
    parser.add_argument("--probe", default=None, help="directory of probe items (.npy or images)")
    parser.add_argument("--out", default=None, help="output .depb path")
    parser.add_argument("--pool", choices=("avg", "flatten"), default=None,
                        help="flatten policy for spatial layer outputs (required when present)")
    parser.add_argument("--resize", nargs=2, type=int, metavar=("H", "W"), default=None)
    parser.add_argument("--normalize", nargs=2, type=_floats, metavar=("MEAN", "STD"),
                        default=None, help="per-channel or scalar normalization constants")
    parser.add_argument("--model-id", default=None)
    parser.add_argument("--probe-id", default=None)
    parser.add_argument("--list-layers", action="store_true",
                        help="print the model's layer names and exit")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.list_layers:
            for name in list_layers(args.model):
                print(name)
            return 0
        missing = [flag for flag, value in (("--layer", args.layer), ("--probe", args.probe),
                                            ("--out", args.out)) if value is None]
        if missing:
            parser.error(f"the following arguments are required: {', '.join(missing)}")
        spec = ExportSpec(
            model=args.model,
            layer=args.layer,
            probe_dir=args.probe,
            out=args.out,
            pool=args.pool,
            resize=tuple(args.resize) if args.resize else None,
            normalize=(args.normalize[0], args.normalize[1]) if args.normalize else None,
            model_id=args.model_id,
            probe_id=args.probe_id,
        )
        path = export(spec)
        print(path)
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
