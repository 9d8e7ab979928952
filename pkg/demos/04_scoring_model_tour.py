"""Anatomy of the dual-stream compatibility model.

Dialog tokens run through a text transformer, panorama regions through a
visual transformer, and designated layers swap queries across streams so
each side can condition on the other. A single scalar compatibility
score comes out per (node, dialog) pair; softmax over a whole
environment's nodes turns the scores into a location distribution.

This script builds a small untrained model and walks through scoring,
prediction, and the invariances the interface guarantees.

Run: python3 demos/04_scoring_model_tour.py
"""

import numpy as np

from graphloc import (Dialog, Episode, LedBertConfig, Message, WorldSpec,
                      build_vocab, flatten_message, generate_caption,
                      generate_environment, init_params, predict,
                      score_environment, score_pair)


def main():
    spec = WorldSpec(
        node_count=6,
        room_types=("kitchen", "bedroom", "office"),
        objects=("chair", "lamp", "plant", "shelf"),
        colors=("red", "blue", "green", "white"),
        regions_per_node=4,
        feature_dim=24,
        seed=11,
    )
    env = generate_environment(spec)
    rng = np.random.default_rng(0)

    # A vocabulary built the usual way: from a corpus of episodes. Eight
    # captions per node cover the world's whole word inventory.
    corpus = [Episode(episode_id=f"v{i:04d}", environment_id=env.environment_id,
                      dialog=Dialog((Message("observer",
                                             generate_caption(env, nid, rng)),)),
                      target_node=nid, split="train")
              for i, nid in enumerate(8 * list(env.graph.node_ids))]
    vocab = build_vocab(corpus)

    config = LedBertConfig(
        vocab_size=len(vocab.tokens),
        feature_dim=spec.feature_dim,
        d_t=32, d_v=32,
        text_layers=2, visual_layers=2,
        co_attention_layer_indices=(1,),
        heads=2, d_ff=64,
        l_max=32, k_max=8,
    )
    params = init_params(config, seed=1)
    print(f"model: {len(params.names)} parameter tensors, "
          f"{sum(int(np.prod(params[n].value.shape)) for n in params.names):,} scalars")
    print(f"co-attention at text/visual layer(s) {config.co_attention_layer_indices}")

    caption = generate_caption(env, "n003", rng)
    ids = flatten_message(Message("observer", caption), vocab)
    print(f"\ncaption for n003: {caption!r}")
    print(f"token ids: {ids}")

    # One pair -> one scalar; a whole environment -> a distribution.
    panos = list(env.panos.values())
    s = score_pair(params, config, env.panos["n003"], ids)
    probs = score_environment(params, config, panos, ids)
    print(f"\nscore(n003, caption) = {s:+.4f}")
    print("distribution over nodes (untrained, so roughly flat):")
    for nid, p in zip(sorted(env.panos), probs):
        print(f"  {nid}: {p:.4f}")
    print(f"sum = {probs.sum():.12f}")
    print(f"predicted node: {predict(params, config, panos, ids)}")

    # The node-list order is presentation detail, not information.
    shuffled = [panos[i] for i in np.random.default_rng(5).permutation(len(panos))]
    same = np.array_equal(score_environment(params, config, shuffled, ids), probs)
    print(f"\nsame distribution after shuffling the pano list: {same}")

    # Scores react to the dialog: swap the caption for another node's and
    # the per-node scores move.
    other = flatten_message(
        Message("observer", generate_caption(env, "n000", rng)), vocab)
    probs2 = score_environment(params, config, panos, other)
    print(f"max |prob shift| under a different caption: "
          f"{np.abs(probs2 - probs).max():.4f}")


if __name__ == "__main__":
    main()
