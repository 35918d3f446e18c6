"""Standalone export script.

    sampler-adapter samples --model stub:constant:0.3 --n 100 --out s.bin
    sampler-adapter reconstructions --model stub:identity \
        --records records.bin --record-ids ids.json --n 10 --out recs/

Exit codes: 0 success, 1 export or model-load failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .export import ExportSpec, export_reconstructions, export_samples
from .miam import ExportError, read_matrix


def _parse_shape(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(","))


def _parse_range(text: str) -> tuple[float, float]:
    lo, hi = text.split(",")
    return float(lo), float(hi)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sampler-adapter")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("samples", "reconstructions"):
        p = sub.add_parser(mode)
        p.add_argument("--model", required=True, help="stub:identity, stub:constant[:v], or a checkpoint path")
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--image-shape", type=_parse_shape, default=(28, 28))
        p.add_argument("--output-range", type=_parse_range, default=(0.0, 1.0))
        p.add_argument("--label", type=int, default=None)
        p.add_argument("--dtype", choices=["f32", "f64"], default="f64")
        if mode == "reconstructions":
            p.add_argument("--records", required=True)
            p.add_argument("--record-ids", help="JSON array of record ids; defaults to record-<i>")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExportSpec(
        model_source=args.model,
        mode=args.mode,
        n=args.n,
        output_path=args.out,
        seed=args.seed,
        image_shape=args.image_shape,
        output_range=args.output_range,
        conditional_label=args.label,
        dtype=args.dtype,
    )
    try:
        if args.mode == "samples":
            export_samples(spec)
        else:
            records = read_matrix(args.records)
            if args.record_ids:
                ids = [str(i) for i in json.loads(Path(args.record_ids).read_text())]
            else:
                ids = [f"record-{i:05d}" for i in range(records.shape[0])]
            export_reconstructions(spec, records, ids)
    except (ExportError, OSError, ValueError) as exc:
        print(f"sampler-adapter: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
