"""Thin CLI client over the service layer.

Every subcommand builds the same pydantic request the HTTP endpoint
accepts and either calls the handler in-process (default) or POSTs it to
a running service (``--server``).  Exit codes: 0 success, 1 validation or
usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Callable

import httpx
from pydantic import BaseModel

from . import __version__
from .service import handlers
from .service import schemas as S


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors per the exit-code contract
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed_default() -> int:
    return int(os.environ.get("IDISTILL_SEED", "0"))


def _echo_config(command: str, req: BaseModel) -> None:
    print(json.dumps({"command": command, **req.model_dump()}, sort_keys=True))


def _call(args, path: str, req: BaseModel, resp_model, local: Callable):
    if args.server:
        url = args.server.rstrip("/") + path
        try:
            resp = httpx.post(url, json=req.model_dump(), timeout=None)
        except httpx.HTTPError as exc:
            raise OSError(f"request to {url} failed: {exc}") from exc
        if resp.status_code == 404:
            raise FileNotFoundError(resp.json().get("detail", "not found"))
        if resp.status_code in (400, 422):
            raise ValueError(json.dumps(resp.json().get("detail", "invalid request")))
        if resp.status_code >= 500:
            raise OSError(json.dumps(resp.json().get("detail", "server error")))
        return resp_model.model_validate(resp.json())
    return local(req)


def _cmd_synth(args) -> int:
    req = S.SynthRequest(
        out_dir=args.out,
        n_identities=args.n_identities,
        images_per_identity=args.images_per_identity,
        n_morphs=args.n_morphs,
        alpha=args.alpha,
        seed=args.seed,
        side=args.side,
        train_frac=args.train_frac,
        val_frac=args.val_frac,
        workers=args.workers,
    )
    _echo_config("synth", req)
    resp = _call(args, "/synth", req, S.SynthResponse, handlers.synth)
    print(resp.manifest_path)
    return 0


def _cmd_train_ae(args) -> int:
    req = S.TrainAutoencoderRequest(
        data=args.data,
        out=args.out,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        side=args.side,
        channels=args.channels,
        deterministic=args.deterministic,
        log_out=args.log,
    )
    _echo_config("train-ae", req)
    resp = _call(args, "/train/autoencoder", req, S.TrainAutoencoderResponse, handlers.train_ae)
    print(resp.checkpoint_path)
    return 0


def _cmd_train_clf(args) -> int:
    req = S.TrainClassifierRequest(
        data=args.data,
        teacher=args.ae,
        out=args.out,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        patience=args.patience,
        base_width=args.base_width,
        kd_weight=args.kd_weight,
        flip_augment=args.flip_augment,
        cache_teacher_codes=args.cache_teacher_codes,
        deterministic=args.deterministic,
        log_out=args.log,
    )
    _echo_config("train-clf", req)
    resp = _call(args, "/train/classifier", req, S.TrainClassifierResponse, handlers.train_clf)
    print(resp.checkpoint_path)
    return 0


def _cmd_eval(args) -> int:
    req = S.EvalRequest(data=args.data, model=args.model, split=args.split, out=args.out)
    _echo_config("eval", req)
    resp = _call(args, "/eval", req, S.EvalResponse, handlers.run_eval)
    print(json.dumps(resp.model_dump(), sort_keys=True))
    return 0


def _cmd_score(args) -> int:
    req = S.ScoreRequest(image=args.image, model=args.model, threshold=args.threshold)
    resp = _call(args, "/score", req, S.ScoreResponse, handlers.score)
    print(f"id_1={resp.id_1:.6f}")
    print(f"id_2={resp.id_2:.6f}")
    print(f"bonafide_score={resp.bonafide_score:.6f}")
    if resp.verdict is not None:
        print(f"verdict: {resp.verdict}")
    return 0


def _cmd_report(args) -> int:
    req = S.ReportRequest(report=args.report, out_svg=args.out_svg, name=args.name)
    resp = _call(args, "/report", req, S.ReportResponse, handlers.report)
    print(resp.summary, end="")
    print(resp.svg_path)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="idistill", description=__doc__)
    parser.add_argument("--version", action="version", version=f"idistill {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(
            name, help=help_, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        p.set_defaults(func=func)
        p.add_argument("--server", default=None, help="base URL of a running service; omit to run in-process")
        return p

    p = add("synth", _cmd_synth, "generate the synthetic morph dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-identities", type=int, default=30)
    p.add_argument("--images-per-identity", type=int, default=3)
    p.add_argument("--n-morphs", type=int, default=40)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--train-frac", type=float, default=0.70)
    p.add_argument("--val-frac", type=float, default=0.15)
    p.add_argument("--workers", type=int, default=0)

    p = add("train-ae", _cmd_train_ae, "stage A: train the autoencoder on bonafide")
    p.add_argument("--data", required=True, help="manifest path")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--log", default=None, help="training log path (default <out>.log.json)")

    p = add("train-clf", _cmd_train_clf, "stage B: train the classifier against the frozen teacher")
    p.add_argument("--data", required=True, help="manifest path")
    p.add_argument("--ae", required=True, help="teacher (autoencoder) checkpoint")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--base-width", type=int, default=16)
    p.add_argument("--kd-weight", type=float, default=1.0)
    p.add_argument("--flip-augment", action="store_true")
    p.add_argument("--cache-teacher-codes", action="store_true")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--log", default=None, help="training log path (default <out>.log.json)")

    p = add("eval", _cmd_eval, "evaluate a classifier on one manifest split")
    p.add_argument("--data", required=True, help="manifest path")
    p.add_argument("--model", required=True, help="classifier checkpoint")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out", default=None, help="write the report JSON here")

    p = add("score", _cmd_score, "score one image with per-vector identity probabilities")
    p.add_argument("--image", required=True)
    p.add_argument("--model", required=True, help="classifier checkpoint")
    p.add_argument("--threshold", type=float, default=None, help="optional operating threshold for a verdict")

    p = add("report", _cmd_report, "render DET curve SVG and summary table from a report")
    p.add_argument("--report", required=True, help="EvalReport JSON path")
    p.add_argument("--out-svg", default=None, help="SVG path (default <report>.svg)")
    p.add_argument("--name", default="model", help="row label in the summary table")

    p = add("serve", _cmd_serve, "run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
