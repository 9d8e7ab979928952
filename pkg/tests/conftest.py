"""Shared fixtures and the acceptance-criteria result summary."""

from __future__ import annotations

import numpy as np
import pytest

from graphloc import DatasetSpec, WorldSpec, generate_dataset, generate_environment, load_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture(scope="session")
def tiny_world_spec():
    """Small but non-degenerate world: 9 nodes, trimmed inventories."""
    return WorldSpec(
        node_count=9,
        room_types=("kitchen", "bedroom", "office"),
        objects=("chair", "lamp", "plant", "shelf"),
        colors=("red", "blue", "green", "white"),
        regions_per_node=6,
        feature_dim=32,
        seed=17,
    )


@pytest.fixture(scope="session")
def tiny_env(tiny_world_spec):
    return generate_environment(tiny_world_spec)


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory):
    """A complete generated dataset, shared across tests that only read it."""
    root = tmp_path_factory.mktemp("dataset")
    spec = DatasetSpec(
        seed=5,
        node_count=6,
        train_envs=2,
        unseen_envs=1,
        test_envs=1,
        train_episodes=40,
        val_seen_episodes=12,
        val_unseen_episodes=12,
        test_episodes=12,
        captions_per_env=10,
        regions_per_node=3,
        feature_dim=24,
        room_types=("kitchen", "bedroom", "office"),
        objects=("chair", "lamp", "plant"),
        colors=("red", "blue", "green"),
    )
    generate_dataset(spec, root)
    return root


@pytest.fixture(scope="session")
def tiny_dataset(tiny_dataset_dir):
    return load_dataset(tiny_dataset_dir)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

_CRITERIA = {
    1: "geodesic oracle equivalence (Dijkstra vs Floyd-Warshall)",
    2: "spatial encoding contract",
    3: "finite-difference gradient checks",
    4: "probability contracts and metric monotonicity",
    5: "learnability at desk scale",
    6: "pretraining benefit direction",
    7: "bit-identical determinism",
    8: "report golden file",
}


def pytest_configure(config):
    config._acceptance_outcomes = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    try:
        number = int(name.removeprefix("test_criterion_").split("_")[0])
    except ValueError:
        return
    outcome = "PASS" if report.passed else "FAIL"
    _outcomes_store[number] = outcome


_outcomes_store: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not _outcomes_store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        outcome = _outcomes_store.get(number, "NOT RUN")
        terminalreporter.write_line(
            f"criterion {number}: {outcome} - {_CRITERIA[number]}"
        )
