"""Command-line entry point.

One JSON config file drives every subcommand; any field can be overridden
on the command line with ``--set dotted.key=value`` (values are parsed as
JSON, falling back to plain strings). The GRAPHLOC_SEED environment
variable, when set, overrides the config seed. Exit codes: 0 on success,
2 for validation errors (bad arguments or config), 3 for data errors
(missing or malformed files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import DataError, ValidationError
from .harness import (DEFAULT_K_LIST, DatasetSpec, EvalReport, TrainConfig,
                      evaluate, generate_dataset, load_dataset, load_model,
                      merge_reports, model_predict, render_report, run_stage)
from .navgraph import geodesic_distance

DEFAULT_CONFIG = {
    "seed": 0,
    "data_dir": "data",
    "out_dir": "runs",
    "dataset": {},
    "model": {},
    "baseline": {},
    "train": {},
    "eval": {"k_list": list(DEFAULT_K_LIST)},
}


def _parse_set(entry: str) -> tuple[list[str], object]:
    if "=" not in entry:
        raise ValidationError(f"--set expects key=value, got {entry!r}")
    key, raw = entry.split("=", 1)
    if not key:
        raise ValidationError(f"--set expects a non-empty key in {entry!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def _apply_override(config: dict, path: list[str], value) -> None:
    node = config
    for part in path[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[path[-1]] = value


def load_config(path: str | None, overrides: list[str]) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ValidationError(f"config {path} must hold a JSON object")
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(config.get(key), dict):
                config[key].update(value)
            else:
                config[key] = value
    for entry in overrides:
        path_parts, value = _parse_set(entry)
        _apply_override(config, path_parts, value)
    env_seed = os.environ.get("GRAPHLOC_SEED")
    if env_seed is not None:
        try:
            config["seed"] = int(env_seed)
        except ValueError:
            raise ValidationError(
                f"GRAPHLOC_SEED must be an integer, got {env_seed!r}") from None
    return config


def _cmd_generate(config: dict) -> int:
    spec = DatasetSpec(seed=int(config["seed"]), **config["dataset"])
    manifest = generate_dataset(spec, config["data_dir"])
    print(f"wrote dataset to {config['data_dir']} "
          f"({len(manifest['outputs'])} files)")
    return 0


def _cmd_train(config: dict, stage: str) -> int:
    train_cfg = TrainConfig(stage=stage, data_dir=config["data_dir"],
                            out_dir=config["out_dir"], seed=int(config["seed"]),
                            model=config["model"], baseline=config["baseline"],
                            **config["train"])
    ckpt = run_stage(train_cfg)
    print(f"wrote checkpoint {ckpt}")
    return 0


def _report_path(config: dict, model_name: str, split: str) -> Path:
    safe = model_name.replace(":", "_").replace("/", "_")
    return Path(config["out_dir"]) / f"report_{safe}_{split}.json"


def _cmd_evaluate(config: dict, ckpt: str, split: str) -> int:
    dataset = load_dataset(config["data_dir"])
    model = load_model(ckpt, dataset)
    k_list = tuple(float(k) for k in config["eval"]["k_list"])
    report = evaluate(model, dataset, split, k_list=k_list)
    out_path = _report_path(config, report.model_name, split)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    metrics = report.splits[split]
    accs = " ".join(f"acc@{k:g}={metrics.acc[k]:.4f}" for k in sorted(metrics.acc))
    print(f"{report.model_name} {split}: n={metrics.episode_count} "
          f"le={metrics.le_mean:.3f}±{metrics.le_stderr:.3f} {accs}")
    print(f"wrote report {out_path}")
    return 0


def _cmd_predict(config: dict, ckpt: str, episode_id: str) -> int:
    dataset = load_dataset(config["data_dir"])
    model = load_model(ckpt, dataset)
    matches = [e for e in dataset.episodes if e.episode_id == episode_id]
    if not matches:
        raise DataError(f"episode {episode_id!r} not found in corpus")
    episode = matches[0]
    predicted = model_predict(model, dataset, episode)
    le = geodesic_distance(dataset.graphs[episode.environment_id], predicted,
                           episode.target_node)
    print(json.dumps({"episode_id": episode.episode_id,
                      "environment_id": episode.environment_id,
                      "predicted": predicted, "target": episode.target_node,
                      "le": le}, sort_keys=True))
    return 0


def _cmd_report(config: dict, fmt: str) -> int:
    out_dir = Path(config["out_dir"])
    paths = sorted(out_dir.glob("report_*.json"))
    if not paths:
        raise DataError(f"no report_*.json files under {out_dir}")
    singles = []
    for path in paths:
        try:
            singles.append(EvalReport.from_dict(
                json.loads(path.read_text(encoding="utf-8"))))
        except (json.JSONDecodeError, KeyError) as exc:
            raise DataError(f"malformed report {path}: {exc}") from exc
    sys.stdout.write(render_report(merge_reports(singles), fmt))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphloc",
        description="Dialog-based localization over navigation graphs.")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field (dotted path, JSON value)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", help="generate a synthetic dataset")

    p_train = sub.add_parser("train", help="train one stage")
    p_train.add_argument("--stage", required=True,
                         help="s1|s2|s3|s4 or baseline:<kind>")

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p_eval.add_argument("--model", required=True, help="checkpoint path")
    p_eval.add_argument("--split", required=True,
                        choices=("train", "val_seen", "val_unseen", "test"))

    p_pred = sub.add_parser("predict", help="predict one episode")
    p_pred.add_argument("--model", required=True, help="checkpoint path")
    p_pred.add_argument("--episode", required=True, help="episode id")

    p_rep = sub.add_parser("report", help="render all saved reports")
    p_rep.add_argument("--format", default="markdown", choices=("markdown", "csv"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.set)
        if args.command == "generate":
            return _cmd_generate(config)
        if args.command == "train":
            return _cmd_train(config, args.stage)
        if args.command == "evaluate":
            return _cmd_evaluate(config, args.model, args.split)
        if args.command == "predict":
            return _cmd_predict(config, args.model, args.episode)
        if args.command == "report":
            return _cmd_report(config, args.format)
        raise ValidationError(f"unknown command {args.command!r}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
