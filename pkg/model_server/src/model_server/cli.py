"""Command line: serve a model or fine-tune one on triple folds."""

from __future__ import annotations

import argparse
import logging
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clozeprobe-server")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve a model over the scorer wire protocol")
    p.add_argument("--model", required=True, help="checkpoint directory or hub id")
    p.add_argument("--port", type=int, default=8500)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--family", choices=("auto", "masked", "causal"), default="auto")
    p.add_argument("--device", default="cpu")
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--checkpoint-dir", default="checkpoints",
                   help="where /v1/finetune writes its outputs")

    p = sub.add_parser("finetune", help="fine-tune a masked model on triple folds")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True, help="training fold TSV (subject/relation/object)")
    p.add_argument("--val", required=True, help="validation fold TSV")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--out", required=True, help="checkpoint output directory")
    p.add_argument("--templates", default=None, help="template table (default: bundled)")
    p.add_argument("--lr", type=float, default=3e-5)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", level=logging.INFO)
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .app import create_app
        from .scoring import load_backend

        backend = load_backend(
            args.model, family=args.family, device=args.device, max_length=args.max_length
        )
        app = create_app(backend, checkpoint_dir=args.checkpoint_dir)
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
        return 0

    from .finetune import finetune

    try:
        checkpoint = finetune(
            model_id=args.model,
            triples_train=args.train,
            triples_val=args.val,
            epochs=args.epochs,
            out_dir=args.out,
            templates_path=args.templates,
            learning_rate=args.lr,
            batch_size=args.batch_size,
            seed=args.seed,
            device=args.device,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"checkpoint written to {checkpoint}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
