"""Experiment orchestration: dataset generation, staged training,
evaluation, and report rendering.

A dataset directory holds graphs, feature stores, an episode corpus, two
caption corpora (for the two alignment stages), a vocabulary, and a
manifest of content hashes. Training proceeds in stages: text-only masked
token modeling, two rounds of cross-modal alignment on the caption
corpora, then node-classification fine-tuning; baselines train in one
stage with the same objective. Every run writes a per-step loss curve, a
checkpoint, and a manifest recording content hashes of its inputs and
outputs, and is bit-reproducible from (seed, config, data).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as bl
from . import ledbert as lb
from .checkpoint import apply_checkpoint, load_checkpoint, save_checkpoint
from .episodes import (Dialog, Episode, Message, SPLITS, Vocabulary, build_vocab,
                       flatten_dialog, flatten_message, load_corpus, load_vocab,
                       save_corpus, save_vocab, truncate_ids)
from .errors import DataError, ValidationError
from .features import PanoObservation, load_features, save_features
from .harness_util import content_hash, stable_int  # noqa: F401  (re-export)
from .layers import ParamSet
from .navgraph import NavGraph, geodesic_distance, load_graph, save_graph
from .optim import SgdConfig, SgdOptimizer
from .synthworld import (DEFAULT_COLORS, DEFAULT_OBJECTS, DEFAULT_ROOMS,
                         SynthEnvironment, WorldSpec, generate_caption,
                         generate_environment, generate_episode)

STAGES = ("s1_text_mlm", "s2_align", "s3_align", "s4_finetune")
STAGE_ALIASES = {"s1": "s1_text_mlm", "s2": "s2_align", "s3": "s3_align",
                 "s4": "s4_finetune"}
REPORT_SPLITS = ("val_seen", "val_unseen", "test")
DEFAULT_K_LIST = (0.0, 3.0, 5.0)


# ---------------------------------------------------------------------------
# dataset generation


@dataclass(frozen=True)
class DatasetSpec:
    """Counts and sizes for one generated dataset. The environment layout
    parameters are forwarded to WorldSpec; the episode counts control the
    corpus, with val_seen reusing the training environments and
    val_unseen/test using environments from held-out seeds. Defaults are
    desk-sized: a trimmed attribute inventory and small feature dimension
    keep training runs in the minutes range."""

    seed: int = 0
    node_count: int = 12
    train_envs: int = 3
    unseen_envs: int = 2
    test_envs: int = 2
    train_episodes: int = 2000
    val_seen_episodes: int = 200
    val_unseen_episodes: int = 200
    test_episodes: int = 200
    captions_per_env: int = 150
    regions_per_node: int = 6
    feature_dim: int = 48
    noise_sigma: float = 0.05
    room_types: tuple[str, ...] = DEFAULT_ROOMS
    objects: tuple[str, ...] = DEFAULT_OBJECTS[:6]
    colors: tuple[str, ...] = DEFAULT_COLORS[:5]

    def __post_init__(self):
        object.__setattr__(self, "room_types", tuple(self.room_types))
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "colors", tuple(self.colors))
        for name in ("train_envs", "unseen_envs", "test_envs"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        for name in ("train_episodes", "val_seen_episodes", "val_unseen_episodes",
                     "test_episodes", "captions_per_env"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    def world_spec(self, env_seed: int) -> WorldSpec:
        return WorldSpec(node_count=self.node_count,
                         room_types=self.room_types,
                         objects=self.objects,
                         colors=self.colors,
                         regions_per_node=self.regions_per_node,
                         feature_dim=self.feature_dim,
                         noise_sigma=self.noise_sigma,
                         seed=env_seed)


def _episode_batch(envs: list[SynthEnvironment], count: int, split: str,
                   rng: np.random.Generator) -> list[Episode]:
    out = []
    for i in range(count):
        env = envs[i % len(envs)]
        out.append(generate_episode(env, rng, episode_id=f"{split}_{i:06d}", split=split))
    return out


def generate_dataset(spec: DatasetSpec, out_dir) -> dict:
    """Write a full dataset directory; returns its manifest."""
    root = Path(out_dir)
    (root / "graphs").mkdir(parents=True, exist_ok=True)
    (root / "features").mkdir(exist_ok=True)

    def env_block(first: int, count: int) -> list[SynthEnvironment]:
        return [generate_environment(spec.world_spec(spec.seed * 1000 + first + j))
                for j in range(count)]

    train = env_block(0, spec.train_envs)
    unseen = env_block(spec.train_envs, spec.unseen_envs)
    test = env_block(spec.train_envs + spec.unseen_envs, spec.test_envs)

    for env in train + unseen + test:
        save_graph(env.graph, root / "graphs" / f"{env.environment_id}.json")
        save_features(env.panos, root / "features" / f"{env.environment_id}.feat")

    episodes = []
    episodes += _episode_batch(train, spec.train_episodes, "train",
                               np.random.default_rng(np.random.SeedSequence((spec.seed, 11))))
    episodes += _episode_batch(train, spec.val_seen_episodes, "val_seen",
                               np.random.default_rng(np.random.SeedSequence((spec.seed, 12))))
    episodes += _episode_batch(unseen, spec.val_unseen_episodes, "val_unseen",
                               np.random.default_rng(np.random.SeedSequence((spec.seed, 13))))
    episodes += _episode_batch(test, spec.test_episodes, "test",
                               np.random.default_rng(np.random.SeedSequence((spec.seed, 14))))
    save_corpus(episodes, root / "corpus.jsonl")

    captions_a, captions_b = [], []
    cap_rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 15)))
    for env in train:
        ids = env.graph.node_ids
        for i in range(spec.captions_per_env):
            node = ids[i % len(ids)]
            text = generate_caption(env, node, cap_rng)
            ep = Episode(episode_id=f"cap_{env.environment_id}_{i:05d}",
                         environment_id=env.environment_id,
                         dialog=Dialog((Message("observer", text),)),
                         target_node=node, split="train")
            (captions_a if i % 2 == 0 else captions_b).append(ep)
    save_corpus(captions_a, root / "captions_a.jsonl")
    save_corpus(captions_b, root / "captions_b.jsonl")

    train_eps = [e for e in episodes if e.split == "train"]
    vocab = build_vocab(train_eps + captions_a + captions_b, min_count=1)
    save_vocab(vocab, root / "vocab.json")

    (root / "world.json").write_text(
        json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    outputs = sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file()
                     and p.name != "manifest.json")
    manifest = {
        "dataset_spec": asdict(spec),
        "outputs": {rel: content_hash(root / rel) for rel in outputs},
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


@dataclass(frozen=True)
class Dataset:
    root: Path
    spec: dict
    graphs: dict[str, NavGraph]
    panos: dict[str, dict[str, PanoObservation]]
    episodes: list[Episode]
    captions_a: list[Episode]
    captions_b: list[Episode]
    vocab: Vocabulary

    def split_episodes(self, split: str) -> list[Episode]:
        if split not in SPLITS:
            raise ValidationError(f"unknown split {split!r}; expected one of {SPLITS}")
        return [e for e in self.episodes if e.split == split]

    @property
    def feature_dim(self) -> int:
        return int(self.spec["feature_dim"])


def load_dataset(root) -> Dataset:
    root = Path(root)
    world_path = root / "world.json"
    if not world_path.exists():
        raise DataError(f"{root} is not a dataset directory (no world.json)")
    spec = json.loads(world_path.read_text(encoding="utf-8"))
    graphs, panos = {}, {}
    for graph_path in sorted((root / "graphs").glob("*.json")):
        g = load_graph(graph_path)
        graphs[g.environment_id] = g
        feat_path = root / "features" / f"{g.environment_id}.feat"
        if not feat_path.exists():
            raise DataError(f"missing feature store for environment {g.environment_id}")
        panos[g.environment_id] = load_features(feat_path)
    if not graphs:
        raise DataError(f"no graphs found under {root / 'graphs'}")
    return Dataset(
        root=root, spec=spec, graphs=graphs, panos=panos,
        episodes=load_corpus(root / "corpus.jsonl"),
        captions_a=load_corpus(root / "captions_a.jsonl"),
        captions_b=load_corpus(root / "captions_b.jsonl"),
        vocab=load_vocab(root / "vocab.json"),
    )


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    stage: str
    data_dir: str
    out_dir: str
    seed: int = 0
    epochs: int = 1
    batch_size: int = 8
    lr: float = 0.1
    momentum: float = 0.9
    warmup_steps: int = 50
    checkpoint_in: str | None = None
    max_episodes: int | None = None
    negative_samples: int | None = None
    model: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=dict)

    def __post_init__(self):
        stage = STAGE_ALIASES.get(self.stage, self.stage)
        object.__setattr__(self, "stage", stage)
        if stage not in STAGES and not stage.startswith("baseline:"):
            raise ValidationError(
                f"unknown stage {stage!r}; expected one of {STAGES} or baseline:<kind>"
            )
        if stage.startswith("baseline:"):
            kind = stage.split(":", 1)[1]
            if kind not in bl.BASELINE_KINDS:
                raise ValidationError(f"unknown baseline kind {kind!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")

    @property
    def stage_tag(self) -> str:
        return self.stage.replace(":", "_")


def _model_config(dataset: Dataset, overrides: dict) -> lb.LedBertConfig:
    base = dict(vocab_size=len(dataset.vocab.tokens), feature_dim=dataset.feature_dim)
    base.update(overrides)
    return lb.LedBertConfig(**base)


def _baseline_config(dataset: Dataset, kind: str, overrides: dict) -> bl.BaselineConfig:
    base = dict(kind=kind, vocab_size=len(dataset.vocab.tokens),
                feature_dim=dataset.feature_dim)
    base.update(overrides)
    return bl.BaselineConfig(**base)


def _led_ids(dataset: Dataset, episode: Episode, l_max: int) -> list[int]:
    return truncate_ids(flatten_dialog(episode.dialog, dataset.vocab), l_max)


def _dialog_input(dataset: Dataset, episode: Episode, kind: str):
    if kind == "history_attention":
        return [flatten_message(m, dataset.vocab) for m in episode.dialog.messages]
    return flatten_dialog(episode.dialog, dataset.vocab)


def _env_panos(dataset: Dataset, env_id: str) -> list[PanoObservation]:
    try:
        return list(dataset.panos[env_id].values())
    except KeyError:
        raise DataError(f"episode references unknown environment {env_id!r}") from None


def _subsample_panos(panos: list[PanoObservation], target: str, n_negatives: int,
                     rng: np.random.Generator) -> list[PanoObservation]:
    others = [p for p in panos if p.node_id != target]
    keep = [p for p in panos if p.node_id == target]
    if n_negatives < len(others):
        idx = rng.choice(len(others), size=n_negatives, replace=False)
        keep += [others[i] for i in sorted(idx)]
    else:
        keep += others
    return keep


def _train_loop(samples: list, loss_fn, params: ParamSet, config: TrainConfig,
                rng: np.random.Generator, curve_path: Path) -> None:
    if not samples:
        raise DataError(f"stage {config.stage} has no training samples")
    opt = SgdOptimizer(SgdConfig(lr=config.lr, momentum=config.momentum,
                                 warmup_steps=config.warmup_steps), params)
    step = 0
    with open(curve_path, "w", encoding="utf-8") as curve:
        for _ in range(config.epochs):
            order = rng.permutation(len(samples))
            for start in range(0, len(order), config.batch_size):
                batch = order[start:start + config.batch_size]
                total = 0.0
                acc: dict[str, np.ndarray] = {}
                for i in batch:
                    loss, grads = loss_fn(samples[i], rng)
                    total += loss
                    for name, g in grads.items():
                        if name in acc:
                            acc[name] += g
                        else:
                            acc[name] = g.copy()
                scale = 1.0 / len(batch)
                for name in acc:
                    acc[name] *= scale
                opt.step(params, acc)
                curve.write(json.dumps({"step": step, "loss": total * scale}) + "\n")
                step += 1


def run_stage(config: TrainConfig) -> Path:
    """Train one stage and write checkpoint, loss curve, and manifest into
    the output directory; returns the checkpoint path."""
    dataset = load_dataset(config.data_dir)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = config.stage
    rng = np.random.default_rng(
        np.random.SeedSequence((config.seed, stable_int(stage))))

    curve_path = out / f"curve_{config.stage_tag}.jsonl"
    ckpt_path = out / f"ckpt_{config.stage_tag}.ckpt"

    if stage.startswith("baseline:"):
        kind = stage.split(":", 1)[1]
        bcfg = _baseline_config(dataset, kind, config.baseline)
        params = bl.init_baseline_params(bcfg, config.seed)
        if config.checkpoint_in:
            apply_checkpoint(params, load_checkpoint(config.checkpoint_in))
        if kind in bl.LEARNED_KINDS:
            episodes = dataset.split_episodes("train")
            if config.max_episodes is not None:
                episodes = episodes[:config.max_episodes]

            def loss_fn(episode, loop_rng):
                panos = _env_panos(dataset, episode.environment_id)
                return bl.baseline_loss(params, bcfg, dataset.graphs[episode.environment_id],
                                        panos, _dialog_input(dataset, episode, kind),
                                        episode.target_node)

            _train_loop(episodes, loss_fn, params, config, rng, curve_path)
        else:
            curve_path.write_text("", encoding="utf-8")
        save_checkpoint(ckpt_path, params, kind=kind, stage=stage, seed=config.seed,
                        config={"baseline": bcfg.to_dict()})
    else:
        mcfg = _model_config(dataset, config.model)
        params = lb.init_params(mcfg, config.seed)
        if config.checkpoint_in:
            apply_checkpoint(params, load_checkpoint(config.checkpoint_in))
        samples, loss_fn = _stage_objective(stage, dataset, params, mcfg, config)
        _train_loop(samples, loss_fn, params, config, rng, curve_path)
        save_checkpoint(ckpt_path, params, kind="ledbert", stage=stage,
                        seed=config.seed, config={"model": mcfg.to_dict()})

    inputs = {"data_dir": str(dataset.root)}
    data_manifest = dataset.root / "manifest.json"
    if data_manifest.exists():
        inputs["data_manifest"] = content_hash(data_manifest)
    if config.checkpoint_in:
        inputs["checkpoint_in"] = content_hash(config.checkpoint_in)
    manifest = {
        "stage": stage,
        "seed": config.seed,
        "train_config": asdict(config),
        "inputs": inputs,
        "outputs": {
            ckpt_path.name: content_hash(ckpt_path),
            curve_path.name: content_hash(curve_path),
        },
    }
    (out / f"manifest_{config.stage_tag}.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return ckpt_path


def _stage_objective(stage: str, dataset: Dataset, params: ParamSet,
                     mcfg: lb.LedBertConfig, config: TrainConfig):
    """(samples, loss_fn) for the transformer stages."""
    if stage == "s1_text_mlm":
        episodes = dataset.split_episodes("train")
        if config.max_episodes is not None:
            episodes = episodes[:config.max_episodes]

        def mlm_fn(episode, rng):
            ids = _led_ids(dataset, episode, mcfg.l_max)
            return lb.mlm_loss(params, mcfg, None, ids, rng)

        return episodes, mlm_fn

    if stage in ("s2_align", "s3_align"):
        captions = dataset.captions_a if stage == "s2_align" else dataset.captions_b
        if config.max_episodes is not None:
            captions = captions[:config.max_episodes]

        def align_fn(episode, rng):
            ids = _led_ids(dataset, episode, mcfg.l_max)
            env_panos = dataset.panos[episode.environment_id]
            true_pano = env_panos[episode.target_node]
            matched = bool(rng.integers(2))
            if matched:
                pair_pano = true_pano
            else:
                others = [p for nid, p in sorted(env_panos.items())
                          if nid != episode.target_node]
                pair_pano = others[int(rng.integers(len(others)))]
            a_loss, a_grads = lb.alignment_loss(params, mcfg, pair_pano, ids, matched)
            m_loss, m_grads = lb.mlm_loss(params, mcfg, true_pano, ids, rng)
            for name, g in m_grads.items():
                a_grads[name] = a_grads[name] + g
            return a_loss + m_loss, a_grads

        return captions, align_fn

    if stage == "s4_finetune":
        episodes = dataset.split_episodes("train")
        if config.max_episodes is not None:
            episodes = episodes[:config.max_episodes]

        def finetune_fn(episode, rng):
            panos = _env_panos(dataset, episode.environment_id)
            if config.negative_samples is not None:
                panos = _subsample_panos(panos, episode.target_node,
                                         config.negative_samples, rng)
            ids = _led_ids(dataset, episode, mcfg.l_max)
            return lb.localization_loss(params, mcfg, panos, ids, episode.target_node)

        return episodes, finetune_fn

    raise ValidationError(f"unknown stage {stage!r}")


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class SplitMetrics:
    episode_count: int
    le_mean: float
    le_stderr: float
    acc: dict[float, float]

    def __post_init__(self):
        ks = sorted(self.acc)
        values = [self.acc[k] for k in ks]
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValidationError("accuracies must lie in [0, 1]")
        if any(b < a - 1e-12 for a, b in zip(values, values[1:])):
            raise ValidationError("accuracy must be non-decreasing in the threshold")


@dataclass(frozen=True)
class EvalReport:
    model_name: str
    splits: dict[str, SplitMetrics]

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "splits": {
                name: {"episode_count": m.episode_count, "le_mean": m.le_mean,
                       "le_stderr": m.le_stderr,
                       "acc": {repr(k): v for k, v in sorted(m.acc.items())}}
                for name, m in self.splits.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        splits = {}
        for name, m in d["splits"].items():
            splits[name] = SplitMetrics(
                episode_count=int(m["episode_count"]),
                le_mean=float(m["le_mean"]), le_stderr=float(m["le_stderr"]),
                acc={float(k): float(v) for k, v in m["acc"].items()})
        return cls(model_name=d["model_name"], splits=splits)


@dataclass(frozen=True)
class LoadedModel:
    kind: str
    stage: str
    seed: int
    params: ParamSet
    model_config: object  # LedBertConfig | BaselineConfig | None


def load_model(ckpt_path, dataset: Dataset) -> LoadedModel:
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.kind == "ledbert":
        mcfg = lb.LedBertConfig.from_dict(ckpt.config["model"])
        params = lb.init_params(mcfg, seed=ckpt.seed)
        apply_checkpoint(params, ckpt)
        return LoadedModel("ledbert", ckpt.stage, ckpt.seed, params, mcfg)
    bcfg = bl.BaselineConfig.from_dict(ckpt.config["baseline"])
    params = bl.init_baseline_params(bcfg, ckpt.seed)
    apply_checkpoint(params, ckpt)
    return LoadedModel(bcfg.kind, ckpt.stage, ckpt.seed, params, bcfg)


def model_predict(model: LoadedModel, dataset: Dataset, episode: Episode) -> str:
    """Predicted node id for one episode; pure given (model, episode)."""
    graph = dataset.graphs.get(episode.environment_id)
    if graph is None:
        raise DataError(f"episode {episode.episode_id}: unknown environment "
                        f"{episode.environment_id!r}")
    if model.kind == "random":
        rng = np.random.default_rng(
            np.random.SeedSequence((model.seed, stable_int(episode.episode_id))))
        return bl.random_baseline(graph, rng)
    if model.kind == "center":
        return bl.center_baseline(graph)
    panos = _env_panos(dataset, episode.environment_id)
    if model.kind == "ledbert":
        mcfg = model.model_config
        ids = _led_ids(dataset, episode, mcfg.l_max)
        return lb.predict(model.params, mcfg, panos, ids)
    bcfg = model.model_config
    node_ids, scores = bl.baseline_scores(
        model.params, bcfg, graph, panos,
        _dialog_input(dataset, episode, bcfg.kind))
    return node_ids[int(np.argmax(scores.value))]


def evaluate(model, dataset: Dataset, split: str,
             k_list: tuple[float, ...] = DEFAULT_K_LIST,
             model_name: str | None = None) -> EvalReport:
    """Localization error and Acc@k over one split. The exact-node
    threshold (k=0) counts node identity; positive thresholds count
    geodesic error <= k. Aggregation is order-independent.

    ``model`` is a LoadedModel, or any callable mapping an episode to a
    predicted node id (useful for oracle probes and hand-built rules)."""
    episodes = dataset.split_episodes(split)
    if not episodes:
        raise DataError(f"split {split!r} has no episodes")
    missing = sorted({e.episode_id for e in episodes
                      if e.environment_id not in dataset.graphs})
    if missing:
        raise DataError("episodes reference unknown environments: " + ", ".join(missing))
    predictor = model if callable(model) else (
        lambda ep: model_predict(model, dataset, ep))
    errors = []
    exact = []
    for episode in episodes:
        predicted = predictor(episode)
        graph = dataset.graphs[episode.environment_id]
        errors.append(geodesic_distance(graph, predicted, episode.target_node))
        exact.append(predicted == episode.target_node)
    errors = np.asarray(errors)
    exact = np.asarray(exact)
    n = len(errors)
    acc = {}
    for k in k_list:
        if k == 0.0:
            acc[0.0] = float(np.mean(exact))
        else:
            acc[float(k)] = float(np.mean(errors <= k))
    metrics = SplitMetrics(
        episode_count=n,
        le_mean=float(np.mean(errors)),
        le_stderr=float(np.std(errors, ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        acc=acc)
    if model_name is not None:
        name = model_name
    elif isinstance(model, LoadedModel):
        # baseline stages already carry the kind ("baseline:gcn")
        name = (model.stage if model.stage.startswith("baseline:")
                else f"{model.kind}:{model.stage}")
    else:
        name = getattr(model, "__name__", "predictor")
    return EvalReport(model_name=name, splits={split: metrics})


def merge_reports(reports: list[EvalReport]) -> list[EvalReport]:
    """Combine single-split reports of the same model into one row each,
    preserving first-seen model order."""
    by_model: dict[str, dict[str, SplitMetrics]] = {}
    for report in reports:
        slot = by_model.setdefault(report.model_name, {})
        for split, metrics in report.splits.items():
            if split in slot:
                raise ValidationError(
                    f"duplicate split {split!r} for model {report.model_name!r}")
            slot[split] = metrics
    return [EvalReport(model_name=name, splits=splits)
            for name, splits in by_model.items()]


def render_report(reports, fmt: str = "markdown") -> str:
    """Fixed-format results table. Markdown shows LE (mean ± standard
    error, meters) and accuracies as percentages, two decimals, for the
    val_seen / val_unseen / test columns; csv carries full-precision
    values for every split and threshold in the report."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    if fmt == "markdown":
        return _render_markdown(reports)
    if fmt == "csv":
        return _render_csv(reports)
    raise ValidationError(f"unknown report format {fmt!r}")


def _fmt_k(k: float) -> str:
    return f"{k:g}"


def _render_markdown(reports: list[EvalReport]) -> str:
    header = ["Model"]
    for split in REPORT_SPLITS:
        header += [f"{split} LE ↓", f"{split} Acc@0m ↑", f"{split} Acc@5m ↑"]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    for report in reports:
        row = [report.model_name]
        for split in REPORT_SPLITS:
            metrics = report.splits.get(split)
            if metrics is None:
                row += ["-", "-", "-"]
                continue
            row.append(f"{metrics.le_mean:.2f} ± {metrics.le_stderr:.2f}")
            for k in (0.0, 5.0):
                if k in metrics.acc:
                    row.append(f"{100.0 * metrics.acc[k]:.2f}")
                else:
                    row.append("-")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _render_csv(reports: list[EvalReport]) -> str:
    k_all = sorted({k for r in reports for m in r.splits.values() for k in m.acc})
    header = ["model", "split", "episodes", "le_mean", "le_stderr"]
    header += [f"acc@{_fmt_k(k)}" for k in k_all]
    rows = [",".join(header)]
    for report in reports:
        ordered = [s for s in SPLITS if s in report.splits]
        ordered += sorted(set(report.splits) - set(SPLITS))
        for split in ordered:
            metrics = report.splits[split]
            row = [report.model_name, split, str(metrics.episode_count),
                   repr(metrics.le_mean), repr(metrics.le_stderr)]
            for k in k_all:
                row.append(repr(metrics.acc[k]) if k in metrics.acc else "")
            rows.append(",".join(row))
    return "\n".join(rows) + "\n"


def parse_csv_report(text: str) -> list[EvalReport]:
    """Inverse of the csv rendering (used to verify round-trips)."""
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    k_cols = [(i, float(name.split("@", 1)[1])) for i, name in enumerate(header)
              if name.startswith("acc@")]
    singles = []
    for line in lines[1:]:
        cells = line.split(",")
        acc = {k: float(cells[i]) for i, k in k_cols if cells[i]}
        singles.append(EvalReport(
            model_name=cells[0],
            splits={cells[1]: SplitMetrics(episode_count=int(cells[2]),
                                           le_mean=float(cells[3]),
                                           le_stderr=float(cells[4]), acc=acc)}))
    return merge_reports(singles)
