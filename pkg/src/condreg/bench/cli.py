"""Command-line entry point.

Subcommands cover the whole workflow: `synth` builds a dataset, `train` fits
a model on it, `register` runs one pair at one weight, `sweep` evaluates a
weight grid, `report` renders sweeps into CSV/plots/summary, and `serve`
starts the HTTP service. Exit code 2 flags usage or out-of-range arguments,
1 any other failure, each with a one-line diagnostic on stderr.

The environment variable CONDREG_SEED, when set, overrides any configured
seed for `synth` and `train`.
"""

from __future__ import annotations

import argparse
import os
import sys

from ..errors import CondRegError, RangeError


def _parse_floats(text: str):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise RangeError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_ints(text: str):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise RangeError(f"expected comma-separated integers, got {text!r}") from exc


def _seed_override(seed: int) -> int:
    env = os.environ.get("CONDREG_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError as exc:
        raise RangeError(f"CONDREG_SEED must be an integer, got {env!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condreg",
        description="Conditional deformable registration toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-pairs", type=int, default=20)
    p.add_argument("--shape", default="64,64")
    p.add_argument("--n-blobs", type=int, default=8)
    p.add_argument("--smoothness", type=float, default=9.0)
    p.add_argument("--max-disp", type=float, default=7.0)
    p.add_argument("--split", default="0.6,0.2,0.2")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a registration model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON training config file")
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument(
        "--conditioning",
        default="cir_dm",
        choices=("cir_dm", "cir_cm", "concat", "fixed"),
    )
    p.add_argument("--fixed-lambda", type=float)

    p = sub.add_parser("register", help="register one pair at one weight")
    p.add_argument("--fixed", required=True)
    p.add_argument("--moving", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="evaluate a model over a weight grid")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--lambdas", default="0.1,0.5,1,2,4,8,10")
    p.add_argument("--out", required=True)
    p.add_argument("--fields", action="store_true", help="also save the fields")
    p.add_argument("--max-cases", type=int)

    p = sub.add_parser("report", help="render sweep results to CSV and plots")
    p.add_argument("--cond", required=True, help="sweep result JSON")
    p.add_argument("--base", help="baseline sweep result JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--t-train", type=float)
    p.add_argument("--t-train-base", type=float)

    p = sub.add_parser("serve", help="start the HTTP inference service")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    return parser


def _cmd_synth(args) -> int:
    from ..datagen.synth import PairSpec, make_dataset

    spec = PairSpec(
        shape=_parse_ints(args.shape),
        n_blobs=args.n_blobs,
        smoothness=args.smoothness,
        max_disp=args.max_disp,
    )
    split = _parse_floats(args.split)
    seed = _seed_override(args.seed)
    manifest = make_dataset(args.n_pairs, spec, args.out, split=split, seed0=seed)
    print(f"wrote {len(manifest['pairs'])} pairs to {args.out}")
    return 0


def _cmd_train(args) -> int:
    from ..condnet.network import default_config
    from ..trainer.config import TrainConfig
    from ..trainer.loop import train

    from dataclasses import asdict

    cfg = TrainConfig.load(args.config) if args.config else TrainConfig()
    overrides = {
        name: getattr(args, name)
        for name in ("iterations", "lr", "seed", "batch_size", "checkpoint_every")
        if getattr(args, name) is not None
    }
    merged = {**asdict(cfg), **overrides}
    merged["seed"] = _seed_override(merged["seed"])
    cfg = TrainConfig(**merged)

    from ..datagen.synth import load_manifest

    manifest = load_manifest(args.data)
    dims = len(manifest["spec"]["shape"])
    model_config = default_config(
        conditioning=args.conditioning,
        dims=dims,
        lambda_range=cfg.lambda_range,
        fixed_lambda=args.fixed_lambda,
    )
    summary = train(cfg, args.data, args.out, model_config=model_config)
    best = summary["best"][0] if summary["best"] else None
    line = f"trained {cfg.iterations} iterations in {summary['train_seconds']:.1f}s"
    if best:
        line += f"; best Dice {best['dice']:.4f} at iteration {best['iteration']}"
    print(line)
    return 0


def _cmd_register(args) -> int:
    from ..condnet.checkpoint import load_checkpoint
    from ..grid.io import load_tensor, save_tensor
    from ..grid.containers import Image
    from ..errors import DataError
    import torch

    model = load_checkpoint(args.model)
    lo, hi = model.config.lambda_range
    if not (lo <= args.lam <= hi):
        raise RangeError(f"lambda {args.lam} outside model range [{lo:g}, {hi:g}]")
    fixed = load_tensor(args.fixed)
    moving = load_tensor(args.moving)
    if not isinstance(fixed, Image) or not isinstance(moving, Image):
        raise DataError("--fixed and --moving must point to image tensors")
    lam_norm = (args.lam - lo) / (hi - lo)
    with torch.no_grad():
        flow, _ = model(fixed, moving, lambda_norm=lam_norm)

    import numpy as np

    from ..grid.containers import DisplacementField

    fld = DisplacementField(values=flow.numpy().astype(np.float32))
    save_tensor(args.out, fld)
    print(f"wrote field {fld.values.shape} to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    from ..condnet.checkpoint import load_checkpoint
    from .sweep import save_sweep_result, sweep_dataset, write_csv

    model = load_checkpoint(args.model)
    lambdas = _parse_floats(args.lambdas)
    lo, hi = model.config.lambda_range
    for lam in lambdas:
        if not (lo <= lam <= hi):
            raise RangeError(f"lambda {lam} outside model range [{lo:g}, {hi:g}]")
    from pathlib import Path

    out = Path(args.out)
    fields_dir = out / "fields" if args.fields else None
    result = sweep_dataset(
        model,
        args.data,
        split=args.split,
        lambdas=lambdas,
        model_id=Path(args.model).stem,
        fields_dir=fields_dir,
        max_cases=args.max_cases,
    )
    out.mkdir(parents=True, exist_ok=True)
    save_sweep_result(result, out / "sweep_result.json")
    write_csv(result, out / "sweep_rows.csv")
    n_cases = len({r["case_id"] for r in result.rows})
    print(f"swept {n_cases} cases x {len(result.lambdas)} weights -> {out}")
    return 0


def _cmd_report(args) -> int:
    from .sweep import load_sweep_result, report

    cond = load_sweep_result(args.cond)
    base = load_sweep_result(args.base) if args.base else None
    paths = report(
        cond,
        args.out,
        sweep_base=base,
        t_train_cond=args.t_train,
        t_train_base=args.t_train_base,
    )
    print(f"report written: {paths['csv']}, {paths['summary']}, {len(paths['plots'])} plots")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from ..service.app import create_app

    app = create_app(args.model, args.data)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "register": _cmd_register,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except RangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CondRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
