"""Synthetic environments with planted, verifiable dialog-node alignment.

Each environment is a connected graph of nodes placed on a jittered grid.
Every node gets a room type plus one (object, color) attribute per region
slot; region features are drawn from a fixed attribute codebook plus
Gaussian noise, so visual observations carry exactly the information the
dialog text mentions. Episodes are templated 2-4 turn dialogs whose
mentioned attributes identify the target node uniquely, and a rule-based
parser (``oracle_locate``) can verify that guarantee independently of any
learned model.

The codebook is orthonormal (pairwise cosine 0 between distinct
attributes) and depends only on the attribute inventory, not on the world
seed, so the same attribute looks the same across environments.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass

import numpy as np

from .episodes import Dialog, Episode, Message, tokenize
from .errors import DataError, ValidationError
from .features import PanoObservation, RegionFeature, grid_boxes
from .navgraph import NavGraph, NavNode, Pose

AMBIGUOUS = "AMBIGUOUS"
"""Sentinel returned by :func:`oracle_locate` when the mentioned
attributes do not select exactly one node."""

_CODEBOOK_SALT = 0x1E0_CB00C  # fixed; the codebook must not vary with world seed

DEFAULT_ROOMS = ("kitchen", "bedroom", "bathroom", "office", "lounge", "hallway")
DEFAULT_OBJECTS = ("chair", "table", "lamp", "sofa", "plant", "shelf",
                   "mirror", "rug", "desk", "bin", "clock", "vase")
DEFAULT_COLORS = ("red", "blue", "green", "white", "black", "yellow", "purple", "brown")

_WORD_RE = re.compile(r"^[a-z]+$")


@dataclass(frozen=True)
class WorldSpec:
    """Recipe for one synthetic environment."""

    node_count: int
    room_types: tuple[str, ...] = DEFAULT_ROOMS
    objects: tuple[str, ...] = DEFAULT_OBJECTS
    colors: tuple[str, ...] = DEFAULT_COLORS
    regions_per_node: int = 36
    feature_dim: int = 2048
    noise_sigma: float = 0.05
    spacing: float = 3.0
    grid_side: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "room_types", tuple(self.room_types))
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "colors", tuple(self.colors))
        if self.node_count < 2:
            raise ValidationError(f"node_count must be >= 2, got {self.node_count}")
        if self.regions_per_node < 1:
            raise ValidationError("regions_per_node must be >= 1")
        if self.feature_dim < 8:
            raise ValidationError("feature_dim must be >= 8")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        if self.spacing <= 0:
            raise ValidationError("spacing must be positive")
        for group, words in (("room_types", self.room_types), ("objects", self.objects),
                             ("colors", self.colors)):
            if not words:
                raise ValidationError(f"{group} must be non-empty")
            if len(set(words)) != len(words):
                raise ValidationError(f"{group} contains duplicates")
            for w in words:
                if not _WORD_RE.match(w):
                    raise ValidationError(
                        f"{group} entry {w!r} must be a single lowercase word"
                    )
        side = self.grid_side if self.grid_side is not None else self._auto_side()
        if side * side < self.node_count:
            raise ValidationError(
                f"grid of side {side} holds {side * side} nodes; "
                f"cannot place {self.node_count}"
            )
        n_pairs = len(self.objects) * len(self.colors)
        if self.regions_per_node - 1 > n_pairs:
            raise ValidationError(
                f"need {self.regions_per_node - 1} distinct (object, color) pairs "
                f"per node but the inventory has only {n_pairs}"
            )
        if len(self.attribute_names()) > self.feature_dim:
            raise ValidationError(
                f"feature_dim={self.feature_dim} is too small to give "
                f"{len(self.attribute_names())} attributes mutually orthogonal codes"
            )

    def _auto_side(self) -> int:
        return math.ceil(math.sqrt(self.node_count))

    @property
    def side(self) -> int:
        return self.grid_side if self.grid_side is not None else self._auto_side()

    def attribute_names(self) -> list[str]:
        """All codebook keys, in a fixed deterministic order."""
        names = [f"room:{r}" for r in self.room_types]
        names += [f"{o}:{c}" for o in self.objects for c in self.colors]
        return names


@dataclass(frozen=True)
class NodeAttributes:
    """Ground-truth contents of one node: its room type and one
    (object, color) pair per region slot after the first (slot 0 shows the
    room itself)."""

    room: str
    pairs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class SynthEnvironment:
    spec: WorldSpec
    graph: NavGraph
    attributes: dict[str, NodeAttributes]
    panos: dict[str, PanoObservation]
    codebook: dict[str, np.ndarray]

    @property
    def environment_id(self) -> str:
        return self.graph.environment_id


def build_codebook(spec: WorldSpec) -> dict[str, np.ndarray]:
    """Unit-norm, mutually orthogonal feature vector per attribute.

    Derived from a fixed salt (never the world seed) so that every
    environment with the same attribute inventory shares one codebook;
    orthogonality gives pairwise cosine similarity exactly 0 < 0.2
    between distinct attributes."""
    names = spec.attribute_names()
    rng = np.random.default_rng(np.random.SeedSequence(_CODEBOOK_SALT))
    gauss = rng.normal(size=(spec.feature_dim, len(names)))
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diag(r))  # canonical orientation: deterministic across BLAS builds
    return {name: np.ascontiguousarray(q[:, i]) for i, name in enumerate(names)}


def check_codebook(codebook: dict[str, np.ndarray], limit: float = 0.2) -> None:
    """Learnability precondition: distinct attributes must be nearly
    dissociated in feature space (pairwise |cosine| below ``limit``)."""
    names = sorted(codebook)
    mat = np.stack([codebook[n] / np.linalg.norm(codebook[n]) for n in names])
    cos = mat @ mat.T
    np.fill_diagonal(cos, 0.0)
    worst = float(np.max(np.abs(cos)))
    if worst >= limit:
        raise ValidationError(
            f"codebook cosine similarity {worst:.3f} exceeds limit {limit}"
        )


def _place_nodes(spec: WorldSpec, rng: np.random.Generator) -> list[NavNode]:
    side = spec.side
    cells = rng.choice(side * side, size=spec.node_count, replace=False)
    width = max(3, len(str(spec.node_count - 1)))
    nodes = []
    for i, cell in enumerate(sorted(int(c) for c in cells)):
        row, col = divmod(cell, side)
        jitter = rng.uniform(-0.2 * spec.spacing, 0.2 * spec.spacing, size=2)
        pose = Pose(
            position=(col * spec.spacing + jitter[0], row * spec.spacing + jitter[1], 0.0),
            heading=rng.uniform(0.0, 2.0 * math.pi),
            elevation=rng.uniform(-0.3, 0.3),
        )
        nodes.append(NavNode(id=f"n{i:0{width}d}", pose=pose, floor_index=0))
    return nodes


def _connect(nodes: list[NavNode], radius: float) -> list[tuple[str, str]]:
    """Radius edges, then the shortest available bridges until connected."""
    dist = {}
    for a, b in itertools.combinations(nodes, 2):
        dist[(a.id, b.id)] = float(np.linalg.norm(a.pose.xyz - b.pose.xyz))
    edges = [pair for pair, d in sorted(dist.items()) if d <= radius]

    parent = {n.id: n.id for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    by_length = sorted(dist.items(), key=lambda item: (item[1], item[0]))
    for (a, b), _ in by_length:
        if find(a) != find(b):
            edges.append((a, b))
            parent[find(a)] = find(b)
    return sorted(edges)


def _assign_attributes(spec: WorldSpec, node_ids: list[str],
                       rng: np.random.Generator) -> dict[str, NodeAttributes]:
    """Rooms and per-slot pairs. Every node is guaranteed at least one
    (object, color) pair held by no other node of the same room, so an
    episode mentioning the room plus that pair is always unambiguous."""
    all_pairs = [(o, c) for o in spec.objects for c in spec.colors]
    n_pairs = spec.regions_per_node - 1

    def draw():
        room = spec.room_types[rng.integers(len(spec.room_types))]
        idx = rng.choice(len(all_pairs), size=n_pairs, replace=False)
        return NodeAttributes(room=room, pairs=tuple(all_pairs[i] for i in sorted(idx)))

    attrs = {nid: draw() for nid in node_ids}
    if n_pairs == 0:
        return attrs
    for _ in range(200):
        clashing = None
        for nid in node_ids:
            peers = set()
            for other, rec in attrs.items():
                if other != nid and rec.room == attrs[nid].room:
                    peers.update(rec.pairs)
            if all(p in peers for p in attrs[nid].pairs):
                clashing = nid
                break
        if clashing is None:
            return attrs
        attrs[clashing] = draw()
    raise DataError(
        "could not assign distinguishing attributes; enlarge the object/color inventory"
    )


def generate_environment(spec: WorldSpec) -> SynthEnvironment:
    """Deterministic function of the spec (including its seed)."""
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0xE47)))
    nodes = _place_nodes(spec, rng)
    edge_pairs = _connect(nodes, radius=1.6 * spec.spacing)
    graph = NavGraph.from_parts(f"env{spec.seed:06d}", nodes, edge_pairs)
    node_ids = [n.id for n in nodes]
    attrs = _assign_attributes(spec, node_ids, rng)
    codebook = build_codebook(spec)
    check_codebook(codebook)
    boxes = grid_boxes(spec.regions_per_node)
    panos = {}
    for nid in node_ids:
        rec = attrs[nid]
        keys = [f"room:{rec.room}"] + [f"{o}:{c}" for o, c in rec.pairs]
        regions = []
        for slot, key in enumerate(keys):
            vec = codebook[key] + rng.normal(0.0, spec.noise_sigma, size=spec.feature_dim)
            regions.append(RegionFeature(visual=vec.astype(np.float32), box=boxes[slot]))
        panos[nid] = PanoObservation(node_id=nid, regions=tuple(regions))
    return SynthEnvironment(spec=spec, graph=graph, attributes=attrs,
                            panos=panos, codebook=codebook)


# ---------------------------------------------------------------------------
# templated dialog

_LOC_OPENERS = (
    "where are you ?",
    "can you describe your location ?",
    "what is around you ?",
)
_LOC_FOLLOWUPS = (
    "what else do you see ?",
    "anything else ?",
)
_PAIR_FORMS = (
    "i can see a {color} {object} .",
    "there is a {color} {object} here .",
    "next to me is a {color} {object} .",
)
_ROOM_FORM = "i am in the {room} ."
_NEIGHBOR_FORM = "the {room} is next door ."


def _matches(env: SynthEnvironment, room: str | None,
             pairs: list[tuple[str, str]], neighbor_rooms: list[str]) -> list[str]:
    """Node ids consistent with every mentioned attribute."""
    out = []
    for nid in env.graph.node_ids:
        rec = env.attributes[nid]
        if room is not None and rec.room != room:
            continue
        if any(p not in rec.pairs for p in pairs):
            continue
        ok = True
        for nroom in neighbor_rooms:
            if not any(env.attributes[nbr].room == nroom
                       for nbr, _ in env.graph.neighbors(nid)):
                ok = False
                break
        if ok:
            out.append(nid)
    return out


def _mention_pairs(env: SynthEnvironment, target: str,
                   rng: np.random.Generator) -> list[tuple[str, str]]:
    """A subset (size <= 3) of the target's pairs that, together with its
    room type, matches no other node."""
    rec = env.attributes[target]
    if not rec.pairs:
        if _matches(env, rec.room, [], []) != [target]:
            raise DataError(f"node {target} is not identifiable (no pairs, shared room)")
        return []
    limit = min(3, len(rec.pairs))
    for size in range(1, limit + 1):
        for _ in range(12):
            idx = rng.choice(len(rec.pairs), size=size, replace=False)
            cand = [rec.pairs[i] for i in sorted(idx)]
            if _matches(env, rec.room, cand, []) == [target]:
                return cand
    # deterministic fallback: a pair no same-room peer holds (guaranteed
    # to exist by _assign_attributes)
    for pair in rec.pairs:
        if _matches(env, rec.room, [pair], []) == [target]:
            return [pair]
    raise DataError(f"no unambiguous mention found for node {target}")


def generate_episode(env: SynthEnvironment, rng: np.random.Generator,
                     episode_id: str = "ep000000", split: str = "train") -> Episode:
    """Uniform target choice, then a 2-4 turn dialog mentioning the
    target's room, one to three of its (object, color) pairs, and one
    neighboring room. The mentioned room+pairs alone pin down the target,
    so every emitted episode is unambiguous by construction."""
    ids = env.graph.node_ids
    target = ids[int(rng.integers(len(ids)))]
    rec = env.attributes[target]
    pairs = _mention_pairs(env, target, rng)
    neighbors = env.graph.neighbors(target)
    neighbor_room = None
    if neighbors:
        nbr, _ = neighbors[int(rng.integers(len(neighbors)))]
        neighbor_room = env.attributes[nbr].room

    def pair_sentence(pair):
        form = _PAIR_FORMS[int(rng.integers(len(_PAIR_FORMS)))]
        return form.format(color=pair[1], object=pair[0])

    room_sent = _ROOM_FORM.format(room=rec.room)
    pair_sents = [pair_sentence(p) for p in pairs]
    tail_sents = ([] if neighbor_room is None
                  else [_NEIGHBOR_FORM.format(room=neighbor_room)])
    opener = _LOC_OPENERS[int(rng.integers(len(_LOC_OPENERS)))]
    followup = _LOC_FOLLOWUPS[int(rng.integers(len(_LOC_FOLLOWUPS)))]

    n_turns = int(rng.integers(2, 5))
    if n_turns == 2 or not (pair_sents or tail_sents):
        messages = [
            Message("locator", opener),
            Message("observer", " ".join([room_sent, *pair_sents, *tail_sents])),
        ]
    elif n_turns == 3:
        head = [room_sent] + pair_sents[:1]
        rest = pair_sents[1:] + tail_sents or [pair_sentence(pairs[0])]
        messages = [
            Message("locator", opener),
            Message("observer", " ".join(head)),
            Message("observer", " ".join(rest)),
        ]
    else:
        head = [room_sent] + pair_sents[:1]
        rest = pair_sents[1:] + tail_sents or [pair_sentence(pairs[0])]
        messages = [
            Message("locator", opener),
            Message("observer", " ".join(head)),
            Message("locator", followup),
            Message("observer", " ".join(rest)),
        ]
    episode = Episode(episode_id=episode_id, environment_id=env.environment_id,
                      dialog=Dialog(tuple(messages)), target_node=target, split=split)
    located = oracle_locate(env, episode)
    if located != target:
        raise DataError(
            f"generated episode {episode_id} resolves to {located!r}, expected {target!r}"
        )
    return episode


def generate_caption(env: SynthEnvironment, node_id: str,
                     rng: np.random.Generator) -> str:
    """Short description of a node for alignment training: its room type
    plus (object, color) mentions that pin the node down uniquely within
    the environment. Uniqueness matters for the alignment objective --
    pairing the caption with any *other* node's panorama must be a true
    mismatch, otherwise same-room negatives carry contradictory labels.
    An extra pair is sometimes appended for surface variety."""
    rec = env.attributes[node_id]
    pairs = _mention_pairs(env, node_id, rng)
    if rec.pairs and len(pairs) < len(rec.pairs) and rng.integers(2):
        extras = [p for p in rec.pairs if p not in pairs]
        pairs = pairs + [extras[int(rng.integers(len(extras)))]]
    sents = [_ROOM_FORM.format(room=rec.room)]
    for pair in pairs:
        form = _PAIR_FORMS[int(rng.integers(len(_PAIR_FORMS)))]
        sents.append(form.format(color=pair[1], object=pair[0]))
    return " ".join(sents)


# ---------------------------------------------------------------------------
# verification oracle

_TEMPLATES = (
    ("room", re.compile(r"^i am in the ([a-z]+) \.$")),
    ("pair", re.compile(r"^i can see a ([a-z]+) ([a-z]+) \.$")),
    ("pair", re.compile(r"^there is a ([a-z]+) ([a-z]+) here \.$")),
    ("pair", re.compile(r"^next to me is a ([a-z]+) ([a-z]+) \.$")),
    ("neighbor", re.compile(r"^the ([a-z]+) is next door \.$")),
    ("question", re.compile(r"^where are you \?$")),
    ("question", re.compile(r"^can you describe your location \?$")),
    ("question", re.compile(r"^what is around you \?$")),
    ("question", re.compile(r"^what else do you see \?$")),
    ("question", re.compile(r"^anything else \?$")),
)


def _split_sentences(text: str) -> list[str]:
    tokens = tokenize(text)
    sentences, current = [], []
    for tok in tokens:
        current.append(tok)
        if tok in (".", "?"):
            sentences.append(" ".join(current))
            current = []
    if current:
        sentences.append(" ".join(current))
    return sentences


def oracle_locate(env: SynthEnvironment, episode: Episode) -> str:
    """Parses the mentioned attributes back out of the dialog and returns
    the unique consistent node, or AMBIGUOUS when the mentions match zero
    or several nodes. Text outside the template grammar is an error."""
    spec = env.spec
    room = None
    pairs: list[tuple[str, str]] = []
    neighbor_rooms: list[str] = []
    for message in episode.dialog.messages:
        for sentence in _split_sentences(message.text):
            for kind, pattern in _TEMPLATES:
                m = pattern.match(sentence)
                if not m:
                    continue
                if kind == "room":
                    word = m.group(1)
                    if word not in spec.room_types:
                        raise DataError(f"unknown room type {word!r} in dialog")
                    if room is not None and room != word:
                        return AMBIGUOUS
                    room = word
                elif kind == "pair":
                    color, obj = m.group(1), m.group(2)
                    if color not in spec.colors or obj not in spec.objects:
                        raise DataError(
                            f"unknown object/color {obj!r}/{color!r} in dialog"
                        )
                    pairs.append((obj, color))
                elif kind == "neighbor":
                    word = m.group(1)
                    if word not in spec.room_types:
                        raise DataError(f"unknown room type {word!r} in dialog")
                    neighbor_rooms.append(word)
                break
            else:
                raise DataError(
                    f"sentence {sentence!r} was not produced by the dialog grammar"
                )
    candidates = _matches(env, room, pairs, neighbor_rooms)
    if len(candidates) == 1:
        return candidates[0]
    return AMBIGUOUS
