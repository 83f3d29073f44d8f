"""Exporter CLI: dump artifacts from an adapter or serve its scorer."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adapters import ChainAdapter, TinyRandomAdapter
from .export import ExportError, ExportJob, export
from .server import ScorerServer

ADAPTERS = ("tiny-random", "chain")


def _build_adapter(args: argparse.Namespace):
    if args.adapter == "tiny-random":
        ids = [f"sample_{i:04d}" for i in range(args.samples)]
        return TinyRandomAdapter(seed=args.seed, feature_dim=args.dim, sample_ids=ids)
    return ChainAdapter(args.chain.split())


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="vqa-export")
    sub = parser.add_subparsers(dest="command", required=True)

    export_p = sub.add_parser("export", help="write banks, vocab, and candidate tables")
    export_p.add_argument("--adapter", choices=ADAPTERS, default="tiny-random")
    export_p.add_argument("--out", required=True)
    export_p.add_argument("--seed", type=int, default=0)
    export_p.add_argument("--dim", type=int, default=8)
    export_p.add_argument("--samples", type=int, default=10)
    export_p.add_argument("--candidate-k", type=int, default=10)
    export_p.add_argument("--chain", default="dirt bike")

    serve_p = sub.add_parser("serve", help="serve next-token distributions over HTTP")
    serve_p.add_argument("--adapter", choices=ADAPTERS, default="chain")
    serve_p.add_argument("--port", type=int, default=8777)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--seed", type=int, default=0)
    serve_p.add_argument("--dim", type=int, default=8)
    serve_p.add_argument("--samples", type=int, default=10)
    serve_p.add_argument("--chain", default="dirt bike")

    args = parser.parse_args(argv)
    adapter = _build_adapter(args)

    if args.command == "export":
        if args.adapter == "chain":
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            path = out / "scorer.json"
            path.write_text(json.dumps(adapter.scorer_doc(), indent=2) + "\n")
            print(f"scorer: {path}")
            return
        try:
            k = min(args.candidate_k, len(adapter.answers))
            written = export(ExportJob(adapter, args.out, candidate_k=k))
        except ExportError as exc:
            print(f"export failed: {exc}", file=sys.stderr)
            sys.exit(1)
        for name, path in sorted(written.items()):
            print(f"{name}: {path}")
        return

    server = ScorerServer(adapter, host=args.host, port=args.port)
    print(f"serving {adapter.name} scorer at {server.url}")
    server.serve()


if __name__ == "__main__":
    main()
