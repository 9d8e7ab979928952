import pytest

from graphloc import (DataError, Dialog, Episode, Message, ValidationError,
                      Vocabulary, build_vocab, flatten_dialog, flatten_message,
                      load_corpus, load_vocab, save_corpus, save_vocab,
                      tokenize, truncate_ids)
from graphloc.episodes import (CLS, MASK, MSG_START, MSG_STOP, PAD, SEP,
                               SPEAKER_TAGS, SPECIALS, UNK)


def make_episode(texts, eid="ep000001", env="env000001", target="n001",
                 split="train"):
    msgs = tuple(Message("locator" if i % 2 == 0 else "observer", t)
                 for i, t in enumerate(texts))
    return Episode(eid, env, Dialog(msgs), target, split)


# ---------------------------------------------------------------------------
# tokenization


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("Am I near the Red Chair?") == [
        "am", "i", "near", "the", "red", "chair", "?"]
    assert tokenize("yes, go left.") == ["yes", ",", "go", "left", "."]


def test_tokenize_is_deterministic_and_idempotent_on_joins():
    text = "I   see a    lamp."
    once = tokenize(text)
    assert once == tokenize(text)
    # re-tokenizing the space-joined tokens reproduces the token list
    assert tokenize(" ".join(once)) == once


def test_tokenize_empty():
    assert tokenize("") == []
    assert tokenize("   \t\n") == []


# ---------------------------------------------------------------------------
# vocabulary


def test_specials_occupy_lowest_ids():
    ep = make_episode(["hello there", "hello again"])
    vocab = build_vocab([ep])
    for i, tok in enumerate(SPECIALS):
        assert vocab.id_of(tok) == i
    assert vocab.id_of(SPEAKER_TAGS["locator"]) == len(SPECIALS)
    assert vocab.id_of(SPEAKER_TAGS["observer"]) == len(SPECIALS) + 1


def test_vocab_frequency_then_lexicographic_order():
    ep = make_episode(["b b b a a c", "a c"])
    vocab = build_vocab([ep])
    words = list(vocab.tokens[len(SPECIALS) + 2:])
    # a appears 3 times, b 3 times, c twice: ties break lexicographically
    assert words == ["a", "b", "c"]


def test_vocab_min_count_filters():
    ep = make_episode(["common common rare"])
    vocab = build_vocab([ep], min_count=2)
    assert "common" in vocab
    assert "rare" not in vocab
    assert vocab.encode("rare") == vocab.id_of(UNK)


def test_vocab_round_trip_encode_decode():
    ep = make_episode(["the red chair is here"])
    vocab = build_vocab([ep])
    for tok in ("the", "red", "chair"):
        assert vocab.decode(vocab.encode(tok)) == tok


def test_vocab_rejects_missing_special_prefix():
    with pytest.raises(ValidationError):
        Vocabulary(["hello", "world"])


def test_vocab_rejects_duplicates():
    tokens = list(SPECIALS) + [SPEAKER_TAGS["locator"], SPEAKER_TAGS["observer"]]
    with pytest.raises(ValidationError):
        Vocabulary(tokens + ["dup", "dup"])


def test_special_ids_exclude_speaker_tags():
    ep = make_episode(["hi"])
    vocab = build_vocab([ep])
    assert vocab.special_ids == frozenset(range(len(SPECIALS)))
    assert vocab.id_of(SPEAKER_TAGS["locator"]) not in vocab.special_ids


def test_empty_corpus_rejected():
    with pytest.raises(ValidationError):
        build_vocab([])


# ---------------------------------------------------------------------------
# flattening


def test_flatten_message_structure():
    ep = make_episode(["where are you"])
    vocab = build_vocab([ep])
    msg = ep.dialog.messages[0]
    ids = flatten_message(msg, vocab)
    assert ids[0] == vocab.id_of(MSG_START)
    assert ids[1] == vocab.id_of(SPEAKER_TAGS["locator"])
    assert ids[-1] == vocab.id_of(MSG_STOP)
    assert [vocab.decode(i) for i in ids[2:-1]] == ["where", "are", "you"]


def test_flatten_dialog_concatenates_messages():
    ep = make_episode(["where are you", "in the kitchen"])
    vocab = build_vocab([ep])
    whole = flatten_dialog(ep.dialog, vocab)
    parts = [flatten_message(m, vocab) for m in ep.dialog.messages]
    assert whole == parts[0] + parts[1]


def test_flatten_maps_oov_to_unk():
    vocab = build_vocab([make_episode(["known words only"])])
    ids = flatten_message(Message("observer", "zebra"), vocab)
    assert ids[2] == vocab.id_of(UNK)


def test_truncate_keeps_tail():
    ids = list(range(20))
    out = truncate_ids(ids, 6)
    assert out == list(range(14, 20))
    assert truncate_ids(ids, 50) == ids
    assert truncate_ids(ids, 50) is not ids  # always a copy


# ---------------------------------------------------------------------------
# validation of containers


def test_message_validation():
    with pytest.raises(ValidationError):
        Message("narrator", "hello")
    with pytest.raises(ValidationError):
        Message("locator", "   ")


def test_dialog_requires_messages():
    with pytest.raises(ValidationError):
        Dialog(())


def test_episode_split_validated():
    with pytest.raises(ValidationError):
        make_episode(["hi"], split="验证")


# ---------------------------------------------------------------------------
# corpus and vocab files


def test_corpus_round_trip(tmp_path):
    eps = [make_episode(["where are you", "by the red chair"], eid=f"ep{i:06d}")
           for i in range(4)]
    path = tmp_path / "corpus.jsonl"
    save_corpus(eps, path)
    assert load_corpus(path) == eps


def test_corpus_malformed_line(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"episode_id": "e1"}\n')
    with pytest.raises(DataError):
        load_corpus(path)
    path.write_text("not json at all\n")
    with pytest.raises(DataError):
        load_corpus(path)


def test_corpus_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_corpus(tmp_path / "nope.jsonl")


def test_vocab_file_round_trip(tmp_path):
    vocab = build_vocab([make_episode(["some words here"])])
    path = tmp_path / "vocab.json"
    save_vocab(vocab, path)
    assert load_vocab(path) == vocab


def test_vocab_file_errors(tmp_path):
    path = tmp_path / "vocab.json"
    path.write_text('{"tokens": ["broken"]}')
    with pytest.raises(DataError):
        load_vocab(path)
    with pytest.raises(DataError):
        load_vocab(tmp_path / "nope.json")
