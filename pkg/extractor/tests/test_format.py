import numpy as np
import pytest

from rfextract.rfemb import (
    Store,
    StoreFormatError,
    load_problems,
    merge_stores,
    read_store,
    write_store,
)


def store_of(ids, dim=4, embedder="e", layer=0, seed=0):
    rng = np.random.default_rng(seed)
    return Store(
        embedder_id=embedder, layer_index=layer, dim=dim,
        vectors={pid: rng.normal(size=dim).astype(np.float32) for pid in ids},
    )


def test_round_trip(tmp_path):
    store = store_of(["a", "b"], dim=6, embedder="tiny", layer=3)
    path = tmp_path / "s.rfemb"
    write_store(store, path)
    back = read_store(path)
    assert (back.embedder_id, back.layer_index, back.dim) == ("tiny", 3, 6)
    assert back.ids == ["a", "b"]
    for pid in store.ids:
        assert np.array_equal(back.vectors[pid], store.vectors[pid])


def test_corruption_detected(tmp_path):
    path = tmp_path / "s.rfemb"
    write_store(store_of(["a"]), path)
    raw = bytearray(path.read_bytes())
    raw[-6] ^= 0x10
    path.write_bytes(raw)
    with pytest.raises(StoreFormatError, match="CRC"):
        read_store(path)


def test_truncation_detected(tmp_path):
    path = tmp_path / "s.rfemb"
    write_store(store_of(["a", "b"]), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-10])
    with pytest.raises(StoreFormatError, match="truncated"):
        read_store(path)


def test_bad_magic_detected(tmp_path):
    path = tmp_path / "s.rfemb"
    path.write_bytes(b"NOTEMB" + b"\x00" * 20)
    with pytest.raises(StoreFormatError, match="magic"):
        read_store(path)


def test_merge_disjoint_shards():
    a = store_of(["a", "b"], seed=1)
    b = store_of(["c"], seed=2)
    merged = merge_stores([a, b])
    assert merged.ids == ["a", "b", "c"]


def test_merge_rejects_overlap_and_mismatch():
    a = store_of(["a", "b"], seed=1)
    with pytest.raises(StoreFormatError, match="overlap"):
        merge_stores([a, store_of(["b"], seed=2)])
    with pytest.raises(StoreFormatError, match="mismatch"):
        merge_stores([a, store_of(["c"], layer=9, seed=2)])


def test_load_problems_validates(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text('{"id": "a", "text": "x"}\n{"id": "a", "text": "y"}\n')
    with pytest.raises(ValueError, match="duplicate"):
        load_problems(path)
