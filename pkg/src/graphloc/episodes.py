"""Dialog episodes, deterministic tokenization, vocabulary, and corpus files.

Corpus files are JSON Lines, one episode per line. Vocabulary files are JSON
with tokens listed in id order. All values are immutable after construction.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, ValidationError

SPEAKERS = ("locator", "observer")
SPLITS = ("train", "val_seen", "val_unseen", "test")

# Reserved special tokens, in id order (ids 0..7).
PAD, UNK, MASK, CLS, SEP, IMG, MSG_START, MSG_STOP = SPECIALS = (
    "[PAD]", "[UNK]", "[MASK]", "[CLS]", "[SEP]", "[IMG]", "[MSG_START]", "[MSG_STOP]",
)
# Speaker tag tokens; always present, immediately after the specials.
SPEAKER_TAGS = {"locator": "[LOC]", "observer": "[OBS]"}


@dataclass(frozen=True)
class Message:
    speaker: str
    text: str

    def __post_init__(self):
        if self.speaker not in SPEAKERS:
            raise ValidationError(f"speaker must be one of {SPEAKERS}, got {self.speaker!r}")
        if not self.text.strip():
            raise ValidationError("message text must be non-empty after trimming")


@dataclass(frozen=True)
class Dialog:
    messages: tuple[Message, ...]

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValidationError("dialog must contain at least one message")

    def __len__(self) -> int:
        return len(self.messages)


@dataclass(frozen=True)
class Episode:
    episode_id: str
    environment_id: str
    dialog: Dialog
    target_node: str
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValidationError(f"split must be one of {SPLITS}, got {self.split!r}")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on Unicode whitespace, and break punctuation
    characters into single-character tokens. Deterministic; empty text
    yields an empty list."""
    tokens: list[str] = []
    current: list[str] = []

    def flush():
        if current:
            tokens.append("".join(current))
            current.clear()

    for ch in text.lower():
        if ch.isspace():
            flush()
        elif unicodedata.category(ch).startswith("P"):
            flush()
            tokens.append(ch)
        else:
            current.append(ch)
    flush()
    return tokens


class Vocabulary:
    """Bijection between tokens and ids. Specials occupy the lowest ids,
    followed by the two speaker tags, then corpus tokens."""

    def __init__(self, tokens: list[str]):
        expected_prefix = list(SPECIALS) + [SPEAKER_TAGS["locator"], SPEAKER_TAGS["observer"]]
        if list(tokens[: len(expected_prefix)]) != expected_prefix:
            raise ValidationError(
                f"vocabulary must start with {expected_prefix}, got {tokens[:len(expected_prefix)]}"
            )
        if len(set(tokens)) != len(tokens):
            raise ValidationError("vocabulary tokens must be unique")
        self._tokens: tuple[str, ...] = tuple(tokens)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._tokens == other._tokens

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def encode(self, token: str) -> int:
        """Id of ``token``; unknown tokens map to UNK."""
        return self._ids.get(token, self._ids[UNK])

    def decode(self, token_id: int) -> str:
        return self._tokens[token_id]

    def id_of(self, special: str) -> int:
        """Id of a special or tag token; raises if absent."""
        if special not in self._ids:
            raise ValidationError(f"token {special!r} not in vocabulary")
        return self._ids[special]

    @property
    def special_ids(self) -> frozenset[int]:
        """Ids that never correspond to dialog words (specials only,
        speaker tags excluded)."""
        return frozenset(range(len(SPECIALS)))


def build_vocab(corpus: list[Episode], min_count: int = 1) -> Vocabulary:
    """Vocabulary over every token occurring >= ``min_count`` times in the
    corpus dialogs. Token order: specials, speaker tags, then corpus tokens
    by descending frequency with lexicographic tie-break."""
    if not corpus:
        raise ValidationError("cannot build a vocabulary from an empty corpus")
    counts: dict[str, int] = {}
    for episode in corpus:
        for message in episode.dialog.messages:
            for token in tokenize(message.text):
                counts[token] = counts.get(token, 0) + 1
    kept = [tok for tok, c in counts.items() if c >= min_count]
    kept.sort(key=lambda tok: (-counts[tok], tok))
    tokens = list(SPECIALS) + [SPEAKER_TAGS["locator"], SPEAKER_TAGS["observer"]] + kept
    return Vocabulary(tokens)


def flatten_message(message: Message, vocab: Vocabulary) -> list[int]:
    """One message as [MSG_START, speaker tag, tokens..., MSG_STOP].
    Out-of-vocabulary tokens map to UNK."""
    ids = [vocab.id_of(MSG_START), vocab.id_of(SPEAKER_TAGS[message.speaker])]
    ids.extend(vocab.encode(tok) for tok in tokenize(message.text))
    ids.append(vocab.id_of(MSG_STOP))
    return ids


def flatten_dialog(dialog: Dialog, vocab: Vocabulary) -> list[int]:
    """Flatten a dialog into one id sequence, concatenating the per-message
    encodings of :func:`flatten_message`."""
    ids: list[int] = []
    for message in dialog.messages:
        ids.extend(flatten_message(message, vocab))
    return ids


def truncate_ids(ids: list[int], max_len: int) -> list[int]:
    """Keep at most ``max_len`` ids, dropping the oldest tokens first; the
    final turns carry the localization-relevant content."""
    if len(ids) <= max_len:
        return list(ids)
    return list(ids[-max_len:])


def save_vocab(vocab: Vocabulary, path) -> None:
    Path(path).write_text(json.dumps({"tokens": list(vocab.tokens)}) + "\n", encoding="utf-8")


def load_vocab(path) -> Vocabulary:
    path = Path(path)
    if not path.exists():
        raise DataError(f"vocabulary file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        return Vocabulary(payload["tokens"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed vocabulary file {path}: {exc}") from exc
    except ValidationError as exc:
        raise DataError(f"invalid vocabulary in {path}: {exc}") from exc


def episode_to_dict(episode: Episode) -> dict:
    return {
        "episode_id": episode.episode_id,
        "environment_id": episode.environment_id,
        "split": episode.split,
        "target_node": episode.target_node,
        "dialog": [{"speaker": m.speaker, "text": m.text} for m in episode.dialog.messages],
    }


def episode_from_dict(entry: dict) -> Episode:
    try:
        dialog = Dialog(tuple(Message(m["speaker"], m["text"]) for m in entry["dialog"]))
        return Episode(
            episode_id=entry["episode_id"],
            environment_id=entry["environment_id"],
            dialog=dialog,
            target_node=entry["target_node"],
            split=entry["split"],
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed episode entry: {exc}") from exc


def save_corpus(episodes: list[Episode], path) -> None:
    """Write episodes as JSON Lines, one per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for episode in episodes:
            fh.write(json.dumps(episode_to_dict(episode)) + "\n")


def load_corpus(path) -> list[Episode]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    episodes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON on line {lineno} of {path}: {exc}") from exc
            try:
                episodes.append(episode_from_dict(entry))
            except (DataError, ValidationError) as exc:
                raise DataError(f"invalid episode on line {lineno} of {path}: {exc}") from exc
    return episodes
