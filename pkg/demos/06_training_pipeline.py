"""End-to-end run at toy scale: data, staged training, evaluation, report.

The harness owns the whole lifecycle. generate_dataset writes graphs,
features, episodes, caption corpora, a vocabulary, and a manifest of
content hashes. run_stage trains one stage from a TrainConfig and drops
a checkpoint + loss curve + manifest; stages chain by pointing
checkpoint_in at the previous output. evaluate computes geodesic error
and threshold accuracies; render_report formats any set of reports as a
common table. Everything here is sized to finish in about a minute.

Run: python3 demos/06_training_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from graphloc import (DatasetSpec, TrainConfig, evaluate, generate_dataset,
                      load_dataset, load_model, merge_reports, model_predict,
                      render_report, run_stage)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        spec = DatasetSpec(
            seed=21,
            node_count=6,
            train_envs=2, unseen_envs=1, test_envs=1,
            train_episodes=120, val_seen_episodes=40,
            val_unseen_episodes=40, test_episodes=40,
            captions_per_env=40,
            regions_per_node=3,
            feature_dim=24,
            room_types=("kitchen", "bedroom", "office"),
            objects=("chair", "lamp", "plant"),
            colors=("red", "blue", "green"),
        )
        data_dir = root / "data"
        manifest = generate_dataset(spec, data_dir)
        print(f"dataset: {len(manifest['outputs'])} files under {data_dir.name}/")
        dataset = load_dataset(data_dir)
        print(f"  {len(dataset.episodes)} episodes, "
              f"{len(dataset.captions_a)} + {len(dataset.captions_b)} captions, "
              f"vocab {len(dataset.vocab.tokens)}")

        # Transformer stages chain through checkpoint_in. Tiny model and
        # short schedules; the point is the plumbing, not the score.
        model = dict(d_t=32, d_v=32, text_layers=1, visual_layers=1,
                     co_attention_layer_indices=(0,), heads=2, d_ff=64,
                     l_max=64, k_max=4)
        ckpt = None
        for stage, epochs in (("s1", 1), ("s2", 2), ("s4", 3)):
            config = TrainConfig(stage=stage, data_dir=str(data_dir),
                                 out_dir=str(root / stage), seed=0,
                                 epochs=epochs, lr=0.05, warmup_steps=20,
                                 checkpoint_in=None if ckpt is None else str(ckpt),
                                 model=model)
            ckpt = run_stage(config)
            curve = [json.loads(line) for line in
                     (root / stage / f"curve_{config.stage_tag}.jsonl").open()]
            print(f"{stage}: {len(curve)} steps, "
                  f"loss {curve[0]['loss']:.3f} -> {curve[-1]['loss']:.3f}")

        # A baseline for comparison, same data, one stage.
        bl_config = TrainConfig(stage="baseline:late_fusion",
                                data_dir=str(data_dir),
                                out_dir=str(root / "bl"), seed=0, epochs=3,
                                lr=0.05, warmup_steps=20,
                                baseline={"hidden": 16})
        bl_ckpt = run_stage(bl_config)

        # Evaluation: load each artifact, measure on two splits, merge the
        # per-split reports into one row per model.
        singles = []
        for path in (ckpt, bl_ckpt):
            loaded = load_model(path, dataset)
            singles.append(evaluate(loaded, dataset, "val_seen"))
            singles.append(evaluate(loaded, dataset, "val_unseen"))
        print()
        print(render_report(merge_reports(singles), fmt="markdown"))

        # Single-episode prediction, the way the CLI's predict verb does it.
        model_loaded = load_model(ckpt, dataset)
        ep = dataset.split_episodes("val_seen")[0]
        pred = model_predict(model_loaded, dataset, ep)
        print(f"episode {ep.episode_id}: predicted {pred}, target {ep.target_node}")


if __name__ == "__main__":
    main()
