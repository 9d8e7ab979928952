"""Shared test utilities: random graph construction and finite-difference
gradient checking against analytic gradients."""

from __future__ import annotations

import numpy as np

from graphloc import NavEdge, NavGraph, NavNode, Pose


def random_graph(rng: np.random.Generator, n_nodes: int | None = None,
                 edge_prob: float = 0.35, env_id: str = "envtest") -> NavGraph:
    """Random geometric-ish graph: uniform positions in a 10 m box, each
    node pair joined with probability ``edge_prob``, plus a spanning chain
    so node 0..i are never fully isolated (components may still arise when
    edge_prob is 0 and the chain is cut -- callers wanting disconnection
    build it explicitly)."""
    if n_nodes is None:
        n_nodes = int(rng.integers(2, 21))
    width = max(3, len(str(n_nodes - 1)))
    nodes = []
    for i in range(n_nodes):
        pos = tuple(float(c) for c in rng.uniform(0.0, 10.0, size=3))
        nodes.append(NavNode(f"n{i:0{width}d}", Pose(pos)))
    pairs = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < edge_prob:
                pairs.append((nodes[i].id, nodes[j].id))
    for i in range(n_nodes - 1):
        pair = (nodes[i].id, nodes[i + 1].id)
        if pair not in pairs:
            pairs.append(pair)
    return NavGraph.from_parts(env_id, nodes, pairs)


def floyd_warshall(graph: NavGraph) -> np.ndarray:
    """All-pairs shortest paths by the O(N^3) recurrence; the independent
    oracle for the Dijkstra implementation."""
    ids = graph.node_ids
    index = {nid: i for i, nid in enumerate(ids)}
    n = len(ids)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for edge in graph.edges:
        a, b = (index[e] for e in edge.endpoints)
        dist[a, b] = min(dist[a, b], edge.length)
        dist[b, a] = dist[a, b]
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def randomize_params(params, rng: np.random.Generator, scale: float = 0.3) -> None:
    """Overwrite every parameter with N(0, scale) noise, in place.

    Gradient checks run at a generic point rather than at the (carefully
    scaled, partially zero) init so that no gradient path is degenerate.
    """
    for name in params.names:
        t = params[name]
        t.value = rng.normal(0.0, scale, size=t.value.shape)


def finite_difference_check(params, loss_fn, rng: np.random.Generator,
                            names=None, samples_per_tensor: int = 4,
                            h: float = 1e-5, rtol: float = 1e-4,
                            atol: float = 1e-9) -> int:
    """Compare analytic gradients with central finite differences.

    ``loss_fn()`` must return (loss, grads) and be deterministic across
    calls (re-seed any internal randomness per call). A sample of
    components is checked per tensor; returns the number of comparisons.

    The pass condition is |fd - an| < atol + rtol*max(|fd|, |an|): the
    relative term is the real check, while ``atol`` absorbs the central
    difference's roundoff floor (~eps*|loss|/h ~ 5e-11 per estimate, with
    a wide safety margin), which otherwise dominates components whose
    true gradient is below ~1e-5.
    """
    _, grads = loss_fn()
    checked = 0
    for name in (names if names is not None else params.names):
        tensor = params[name]
        analytic = grads[name]
        size = tensor.value.size
        if size <= samples_per_tensor:
            flat_indices = np.arange(size)
        else:
            flat_indices = rng.choice(size, size=samples_per_tensor, replace=False)
        for idx in flat_indices:
            original = tensor.value.flat[idx]
            tensor.value.flat[idx] = original + h
            hi = loss_fn()[0]
            tensor.value.flat[idx] = original - h
            lo = loss_fn()[0]
            tensor.value.flat[idx] = original
            fd = (hi - lo) / (2.0 * h)
            an = float(analytic.flat[idx])
            denom = max(abs(fd), abs(an))
            err = abs(fd - an)
            assert err < atol + rtol * denom, (
                f"{name}[{idx}]: analytic {an:.10g} vs finite difference "
                f"{fd:.10g} (err {err:.3g}, scale {denom:.3g})"
            )
            checked += 1
    return checked
