"""Navigation graphs, geodesic distances, and what the error metric sees.

Localization error is measured along the graph, not through walls: the
distance between a guess and the true node is the length of the shortest
path connecting them. This script builds a small two-corridor floor plan
by hand, where the straight-line and geodesic pictures disagree, and then
shows the remaining graph utilities (snapping a point to a node, the
centroid node used by the naive center baseline).

Run: python3 demos/02_graphs_and_geodesics.py
"""

import numpy as np

from graphloc import (NavEdge, NavGraph, NavNode, Pose, centroid_node,
                      geodesic_distance, single_source_distances, snap_to_node)


def corridor_graph() -> NavGraph:
    """Two parallel corridors joined only at the far end:

        a --- b --- c --- d
                          |
        h --- g --- f --- e

    a and h are 2 m apart through the wall but 14 m apart on foot.
    """
    coords = {
        "a": (0, 2), "b": (2, 2), "c": (4, 2), "d": (6, 2),
        "e": (6, 0), "f": (4, 0), "g": (2, 0), "h": (0, 0),
    }
    nodes = [NavNode(nid, Pose((x, y, 0.0))) for nid, (x, y) in coords.items()]
    chain = ["a", "b", "c", "d", "e", "f", "g", "h"]
    return NavGraph.from_parts("corridors", nodes, list(zip(chain, chain[1:])))


def main():
    graph = corridor_graph()

    a, h = graph.node("a").pose.xyz, graph.node("h").pose.xyz
    print(f"euclidean a->h : {np.linalg.norm(a - h):5.2f} m")
    print(f"geodesic  a->h : {geodesic_distance(graph, 'a', 'h'):5.2f} m")
    print()

    dist = single_source_distances(graph, "a")
    print("distances from a:", {k: round(v, 1) for k, v in sorted(dist.items())})

    # An unreachable node comes back infinite rather than erroring.
    lonely = NavGraph(
        environment_id="lonely",
        nodes=list(graph.nodes) + [NavNode("z", Pose((9.0, 9.0, 0.0)))],
        edges=list(graph.edges),
    )
    print(f"\nisolated node: geodesic a->z = {geodesic_distance(lonely, 'a', 'z')}")

    # snap_to_node is how simulated guessers turn a continuous position
    # into a graph answer; centroid_node is the center baseline's guess.
    point = np.array([3.2, 1.7, 0.0])
    print(f"\nsnap {point[:2]} -> {snap_to_node(graph, point)}")
    print(f"centroid node of the corridor map: {centroid_node(graph)}")

    # Guessing the wrong corridor is heavily punished by the geodesic
    # metric even though every wrong node is "close" through the wall.
    print("\ngeodesic error if the target is a and the model guesses ...")
    for guess in ["b", "d", "e", "h"]:
        print(f"  {guess}: {geodesic_distance(graph, guess, 'a'):5.2f} m")


if __name__ == "__main__":
    main()
