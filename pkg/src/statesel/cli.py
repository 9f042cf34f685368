"""Command-line interface.

Verbs: ``demo-gen``, ``collect``, ``train``, ``select``, ``evaluate``,
``ingest``. All take ``--config FILE`` and repeated ``--set key=value``
overrides. Every run writes a manifest next to its output recording the
config, its hash, the seed, the package version and input file digests.

Exit codes: 0 success, 1 task error, 2 config or schema error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .actor import RemoteActor, arrangement_actor
from .arrangement import load_vocabulary
from .config import Config, ConfigError, load_config
from .core import (
    SchemaError,
    StateselError,
    feature_set_from_record,
    task_from_record,
)
from .harness import evaluate, generate_demonstrations, ingest_external_trajectories
from .learning import ValueDataset, collect_value_dataset, train
from .records import dumps, iter_jsonl, read_expert_steps, write_expert_steps, write_jsonl
from .selector import select
from .value import Featurizer, LinearValueModel

EXIT_OK, EXIT_TASK, EXIT_CONFIG = 0, 1, 2


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path: Path, verb: str, cfg: Config, inputs: dict[str, str]) -> None:
    manifest = {
        "command": verb,
        "version": __version__,
        "backend": kernels.BACKEND,
        "seed": cfg.rng_seed,
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "inputs": {k: _sha256(v) for k, v in sorted(inputs.items())},
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def _actor(cfg: Config):
    if cfg.actor == "remote":
        return RemoteActor(timeout=cfg.actor_timeout, max_workers=cfg.workers)
    return arrangement_actor(cfg.boost, cfg.penalty)


def _vocab(cfg: Config):
    return load_vocabulary(cfg.vocabulary or None)


def load_checkpoint(path: str | Path) -> LinearValueModel:
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read checkpoint {path}: {exc}") from exc
    return LinearValueModel.from_record(rec)


def cmd_demo_gen(args, cfg: Config) -> dict:
    rng = np.random.default_rng(cfg.rng_seed)
    demos = generate_demonstrations(cfg.n_demos, rng, cfg.demo_targets, cfg.n_objects, "train", _vocab(cfg))
    n = write_expert_steps(args.out, [s for d in demos for s in d])
    print(f"wrote {n} expert steps from {len(demos)} demonstrations to {args.out}")
    return {}


def cmd_collect(args, cfg: Config) -> dict:
    steps = read_expert_steps(args.steps)
    dataset = collect_value_dataset(steps, _actor(cfg), cfg, np.random.default_rng(cfg.rng_seed))
    write_jsonl(args.out, dataset.to_records())
    print(f"wrote {len(dataset)} value examples from {len(steps)} steps to {args.out}")
    return {"steps": args.steps}


def cmd_train(args, cfg: Config) -> dict:
    dataset = ValueDataset.from_records(iter_jsonl(args.dataset))
    init = load_checkpoint(args.init) if args.init else LinearValueModel(Featurizer(cfg.hash_bits))
    model, report = train(init, dataset, cfg, np.random.default_rng(cfg.rng_seed))
    out = Path(args.out)
    out.write_text(dumps(model.to_record()) + "\n", encoding="utf-8")
    out.with_name(out.name + ".report.json").write_text(dumps(report.to_record()) + "\n", encoding="utf-8")
    print(f"trained on {report.n_examples_upsampled} examples; final loss {report.epoch_losses[-1]:.6g}")
    inputs = {"dataset": args.dataset}
    if args.init:
        inputs["init"] = args.init
    return inputs


def cmd_select(args, cfg: Config) -> dict:
    model = load_checkpoint(args.checkpoint)
    traces = []
    for line, rec in iter_jsonl(args.input):
        fs = feature_set_from_record(rec.get("feature_set"), line, "feature_set.")
        task = task_from_record(rec.get("task"), line, "task.")
        trace = select(model, task, fs, cfg.max_len)
        out = trace.to_record()
        out["task"] = {"id": task.id, "description": task.description}
        out["texts"] = trace.chosen.texts(fs)
        traces.append(out)
    write_jsonl(args.out, traces)
    print(f"wrote {len(traces)} selection traces to {args.out}")
    return {"input": args.input, "checkpoint": args.checkpoint}


def cmd_evaluate(args, cfg: Config) -> dict:
    model = load_checkpoint(args.checkpoint) if args.checkpoint else None
    _, metrics = evaluate(cfg, _actor(cfg), model, args.out_dir, _vocab(cfg))
    sys.stdout.write(metrics.table())
    return {"checkpoint": args.checkpoint} if args.checkpoint else {}


def cmd_ingest(args, cfg: Config) -> dict:
    steps = ingest_external_trajectories(args.input)
    n = write_expert_steps(args.out, steps)
    print(f"validated {n} expert steps from {args.input}")
    return {"input": args.input}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file with a [statesel] section")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")

    p = argparse.ArgumentParser(prog="statesel", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("demo-gen", parents=[common], help="synthesize expert demonstrations")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_demo_gen)

    s = sub.add_parser("collect", parents=[common], help="collect the labeled value dataset")
    s.add_argument("--steps", required=True, help="expert steps (JSONL)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_collect)

    s = sub.add_parser("train", parents=[common], help="train the value model")
    s.add_argument("--dataset", required=True)
    s.add_argument("--init", help="checkpoint to start from")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("select", parents=[common], help="select descriptions with a checkpoint")
    s.add_argument("--input", required=True, help="JSONL of {feature_set, task} records")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("evaluate", parents=[common], help="run the evaluation matrix")
    s.add_argument("--checkpoint")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("ingest", parents=[common], help="validate external expert steps")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)
    return p


def _parse_sets(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _parse_sets(args.overrides))
        inputs = args.func(args, cfg)
        out = Path(getattr(args, "out", None) or args.out_dir)
        if args.config:
            inputs["config_file"] = args.config
        write_manifest(_manifest_path(out), args.verb, cfg, inputs)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StateselError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TASK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
