"""Command-line front end: train a policy, evaluate a checkpoint.

Both verbs talk to an environment endpoint.  By default a server
subprocess is spawned (``freshcov serve-env`` over stdio); pass
``--endpoint HOST:PORT`` to attach to an already-running TCP server
instead.

``train`` writes a checkpoint directory (manifest.json + weights.pt)
and a ``curve.csv`` training curve with one row per episode.
``evaluate`` prints aggregate metrics and optionally writes them as CSV.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

from .evaluate import evaluate, load_checkpoint
from .protocol import EnvClient, EnvDiedError, EnvProtocolError
from .trainer import MaddpgTrainer, TrainerConfig

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

CURVE_COLUMNS = ["episode", "eta_coverage", "reward"]


def _load_json(path: str, what: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON in {what}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: {what} must be a JSON object")
    return doc


def _make_client(endpoint: Optional[str], env_cmd: str) -> EnvClient:
    if endpoint is None:
        return EnvClient.spawn(env_cmd.split())
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host:
        raise ValueError(f"--endpoint expects HOST:PORT, got {endpoint!r}")
    try:
        port_num = int(port)
    except ValueError as exc:
        raise ValueError(f"--endpoint expects HOST:PORT, got {endpoint!r}") from exc
    return EnvClient.connect(host, port_num)


def _write_curve(path: str, rows: List[Dict[str, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(CURVE_COLUMNS)
        for row in rows:
            writer.writerow(
                [int(row["episode"]), f"{row['eta_coverage']:.10g}", f"{row['reward']:.10g}"]
            )


def _write_eval_curve(path: str, rows: List[Dict[str, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["episode", "eta_coverage"])
        for row in rows:
            writer.writerow([int(row["episode"]), f"{row['eta_coverage']:.10g}"])


def _trainer_config(args: argparse.Namespace) -> TrainerConfig:
    overrides: Dict[str, Any] = {}
    if args.trainer is not None:
        overrides.update(_load_json(args.trainer, "trainer config"))
    if "hidden_sizes" in overrides:
        overrides["hidden_sizes"] = tuple(overrides["hidden_sizes"])
    for key, attr in (
        ("episodes", "episodes"),
        ("variant", "variant"),
        ("seed", "seed"),
        ("progress_every", "progress"),
    ):
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    # Command-line runs should never be silent by accident: if neither the
    # flag nor the trainer file set a cadence, report every 100 episodes.
    overrides.setdefault("progress_every", 100)
    unknown = set(overrides) - {f.name for f in TrainerConfig.__dataclass_fields__.values()}
    if unknown:
        raise ValueError(f"unknown trainer config fields: {sorted(unknown)}")
    config = TrainerConfig(**overrides)
    config.validate()
    return config


def _cmd_train(args: argparse.Namespace) -> int:
    scenario = _load_json(args.scenario, "scenario")
    config = _trainer_config(args)
    os.makedirs(args.out, exist_ok=True)
    with _make_client(args.endpoint, args.env_cmd) as client:
        trainer = MaddpgTrainer(client, scenario, config)
        curve = trainer.train()
        trainer.save_checkpoint(args.out)
    _write_curve(os.path.join(args.out, "curve.csv"), curve)
    if trainer.eval_curve:
        _write_eval_curve(os.path.join(args.out, "eval.csv"), trainer.eval_curve)
    tail = curve[-min(len(curve), 100):]
    mean_tail = sum(r["eta_coverage"] for r in tail) / len(tail)
    print(
        f"trained variant={config.variant} episodes={config.episodes} "
        f"tail-100 eta-coverage={mean_tail:.4f} checkpoint={args.out}"
    )
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    scenario = _load_json(args.scenario, "scenario") if args.scenario else None
    with _make_client(args.endpoint, args.env_cmd) as client:
        result = evaluate(
            client, checkpoint, episodes=args.episodes, seed=args.seed, scenario=scenario
        )
    doc = result.to_dict()
    for key in ("p_c_hat", "sensing_ratio", "ec_ratio", "mean_sink_aoi", "mean_coverage"):
        print(f"{key}={doc[key]:.6f}")
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            keys = list(doc)
            writer.writerow(keys)
            writer.writerow([f"{doc[k]:.10g}" if isinstance(doc[k], float) else doc[k] for k in keys])
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maddpg-trainer",
        description="Train and evaluate decision policies over the JSON environment protocol.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    train = sub.add_parser("train", help="train a policy and save a checkpoint")
    train.add_argument("--scenario", required=True, help="scenario JSON file for the environment")
    train.add_argument("--out", required=True, help="checkpoint output directory")
    train.add_argument("--trainer", help="JSON file of TrainerConfig overrides")
    train.add_argument("--episodes", type=int, help="training episodes")
    train.add_argument("--variant", choices=("scd", "sd-ec", "sd-lc"), help="policy variant")
    train.add_argument("--seed", type=int, help="master seed")
    train.add_argument(
        "--progress",
        type=int,
        help="print a progress line every N episodes (default 100; "
        'set "progress_every": null in the trainer file for silence)',
    )
    train.add_argument("--endpoint", help="attach to a TCP server HOST:PORT instead of spawning")
    train.add_argument(
        "--env-cmd",
        default="freshcov serve-env",
        help="command spawned for a stdio environment server",
    )
    train.set_defaults(func=_cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a checkpoint greedily")
    ev.add_argument("--checkpoint", required=True, help="checkpoint directory")
    ev.add_argument("--episodes", type=int, default=50, help="evaluation episodes")
    ev.add_argument("--seed", type=int, default=0, help="first evaluation episode seed")
    ev.add_argument("--scenario", help="override the checkpoint's scenario JSON file")
    ev.add_argument("--out", help="also write the metrics as a CSV file")
    ev.add_argument("--endpoint", help="attach to a TCP server HOST:PORT instead of spawning")
    ev.add_argument(
        "--env-cmd",
        default="freshcov serve-env",
        help="command spawned for a stdio environment server",
    )
    ev.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnvProtocolError, EnvDiedError, RuntimeError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
