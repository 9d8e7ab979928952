"""The reference predictors, from trivial to graph-aware.

Six baselines bracket the scoring model: uniform random and map-centroid
guessing need no training; a late-fusion recurrent net, two
attention-pooled variants (one splitting dialog history from the current
message), and an edge-conditioned graph convolution net all train
against the same cross-entropy objective as the main model.

Run: python3 demos/05_baseline_zoo.py
"""

import numpy as np

from graphloc import (BaselineConfig, WorldSpec, attention_predict,
                      build_vocab, center_baseline, edge_attributes,
                      encode_dialog, gcn_predict, generate_environment,
                      generate_episode, history_attention_predict,
                      init_baseline_params, late_fusion_predict,
                      random_baseline)
from graphloc.episodes import Dialog, Episode, Message, flatten_dialog, flatten_message


def main():
    spec = WorldSpec(
        node_count=6,
        room_types=("kitchen", "bedroom", "office"),
        objects=("chair", "lamp", "plant", "shelf"),
        colors=("red", "blue", "green", "white"),
        regions_per_node=4,
        feature_dim=24,
        seed=2,
    )
    env = generate_environment(spec)
    rng = np.random.default_rng(9)
    episode = generate_episode(env, rng, episode_id="zoo_000000")
    vocab = build_vocab([episode])
    panos = list(env.panos.values())

    print(f"dialog (target {episode.target_node}):")
    for msg in episode.dialog.messages:
        print(f"  {msg.speaker:>8}: {msg.text}")

    # Trivial reference points.
    draws = [random_baseline(env.graph, rng) for _ in range(5)]
    print(f"\nrandom guesses: {draws}")
    print(f"center baseline always answers: {center_baseline(env.graph)}")

    # Learned kinds share the config shape; each gets its own parameters.
    dialog_ids = flatten_dialog(episode.dialog, vocab)
    message_ids = [flatten_message(m, vocab) for m in episode.dialog.messages]

    def show(name, probs):
        cells = "  ".join(f"{p:.3f}" for p in probs)
        print(f"  {name:<18} [{cells}]  sum={probs.sum():.6f}")

    print(f"\nuntrained distributions over {sorted(env.panos)}:")
    for kind in ("late_fusion", "attention", "history_attention", "gcn"):
        config = BaselineConfig(kind=kind, vocab_size=len(vocab.tokens),
                                feature_dim=spec.feature_dim, hidden=16)
        params = init_baseline_params(config, seed=4)
        if kind == "late_fusion":
            probs = late_fusion_predict(params, config, panos, dialog_ids)
        elif kind == "attention":
            probs = attention_predict(params, config, panos, dialog_ids)
        elif kind == "history_attention":
            probs = history_attention_predict(params, config, panos, message_ids)
        else:
            probs = gcn_predict(params, config, env.graph, panos, dialog_ids)
        show(kind, probs)

    # The dialog encoder output all learned kinds build on.
    config = BaselineConfig(kind="late_fusion", vocab_size=len(vocab.tokens),
                            feature_dim=spec.feature_dim, hidden=16)
    params = init_baseline_params(config, seed=4)
    vec = encode_dialog(params, config, dialog_ids)
    print(f"\nencode_dialog -> vector of shape {vec.shape}, norm {np.linalg.norm(vec):.3f}")

    # The graph net's edges carry relative pose, expressed in the source
    # node's heading frame.
    a, b = env.graph.edges[0].endpoints
    attrs = edge_attributes(env.graph, a, b)
    print(f"\nedge {a} -> {b}: local displacement {np.round(attrs[:3], 2)}, "
          f"heading cos/sin {np.round(attrs[3:5], 2)}, "
          f"elevation diff {attrs[5]:+.2f}")


if __name__ == "__main__":
    main()
