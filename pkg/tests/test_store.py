"""Store format round-trips, integrity checks, and the synthetic generator."""

import numpy as np
import pytest

from rapf import store as store_mod
from rapf.errors import (
    ConfigurationError,
    StoreCorruptionError,
    StoreFormatError,
    StoreIntegrityError,
)
from rapf.store import (
    SPLIT_TEST,
    ClassCatalog,
    EmbeddingStore,
    load_store,
    make_synthetic,
    save_store,
)


def tiny_store(dim=4, with_records=True):
    rng = np.random.default_rng(0)
    texts = rng.standard_normal((2, dim))
    texts /= np.linalg.norm(texts, axis=1, keepdims=True)
    catalog = ClassCatalog(names=["cat", "dog"], text_embeddings=texts.astype(np.float32))
    if with_records:
        n = 6  # 2 train + 1 test per class
        vectors = rng.standard_normal((n, dim)).astype(np.float32)
        class_ids = np.array([0, 0, 0, 1, 1, 1], dtype=np.uint32)
        splits = np.array([0, 0, 1, 0, 0, 1], dtype=np.uint8)
    else:
        vectors = np.zeros((0, dim), dtype=np.float32)
        class_ids = np.zeros(0, dtype=np.uint32)
        splits = np.zeros(0, dtype=np.uint8)
    return EmbeddingStore(catalog=catalog, class_ids=class_ids, splits=splits, vectors=vectors)


class TestRoundTrip:
    def test_minimal_file(self, tmp_path):
        rng = np.random.default_rng(1)
        texts = rng.standard_normal((2, 4))
        texts /= np.linalg.norm(texts, axis=1, keepdims=True)
        store = EmbeddingStore(
            catalog=ClassCatalog(["a", "b"], texts.astype(np.float32)),
            class_ids=np.array([0, 0, 1, 1, 0, 1], dtype=np.uint32),
            splits=np.array([0, 0, 0, 0, 1, 1], dtype=np.uint8),
            vectors=rng.standard_normal((6, 4)).astype(np.float32),
        )
        path = tmp_path / "t.rapfemb"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded.num_classes == 2
        assert loaded.num_records == 6

    def test_bitwise_roundtrip(self, tmp_path):
        store = make_synthetic(6, 16, 4, 2, 0.1, 0.5, seed=5)
        path = tmp_path / "t.rapfemb"
        save_store(store, path)
        loaded = load_store(path)
        assert np.array_equal(loaded.vectors, store.vectors)
        assert np.array_equal(loaded.catalog.text_embeddings, store.catalog.text_embeddings)
        assert np.array_equal(loaded.class_ids, store.class_ids)
        assert np.array_equal(loaded.splits, store.splits)
        assert loaded.catalog.names == store.catalog.names

    def test_double_roundtrip_byte_identical(self, tmp_path):
        store = make_synthetic(4, 8, 3, 1, 0.2, 0.0, seed=2)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_store(store, p1)
        save_store(load_store(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_records(self, tmp_path):
        store = tiny_store(with_records=False)
        path = tmp_path / "empty.rapfemb"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded.num_records == 0
        assert loaded.is_partial  # no class has train data

    def test_utf8_class_names(self, tmp_path):
        store = tiny_store()
        store.catalog.names = ["école", "日本犬"]
        path = tmp_path / "uni.rapfemb"
        save_store(store, path)
        assert load_store(path).catalog.names == ["école", "日本犬"]

    def test_file_size_arithmetic(self, tmp_path):
        # header + catalog + u64 count + n * (4 + 1 + 4d) bytes, nothing else
        dim, n = 512, 100_000
        rng = np.random.default_rng(3)
        texts = rng.standard_normal((2, dim)).astype(np.float64)
        texts /= np.linalg.norm(texts, axis=1, keepdims=True)
        store = EmbeddingStore(
            catalog=ClassCatalog(["x", "yy"], texts.astype(np.float32)),
            class_ids=(rng.integers(0, 2, n)).astype(np.uint32),
            splits=np.zeros(n, dtype=np.uint8),
            vectors=np.zeros((n, dim), dtype=np.float32),
        )
        path = tmp_path / "big.rapfemb"
        save_store(store, path)
        catalog_bytes = (2 + 1 + 4 * dim) + (2 + 2 + 4 * dim)
        expected = 20 + catalog_bytes + 8 + n * (4 + 1 + 4 * dim)
        assert path.stat().st_size == expected


class TestValidation:
    def test_bad_norm_names_class(self, tmp_path):
        store = tiny_store()
        path = tmp_path / "bad.rapfemb"
        save_store(store, path)
        raw = bytearray(path.read_bytes())
        # scale class 0's text embedding to norm 0.5 in place
        off = 20 + 2 + len(b"cat")
        vec = np.frombuffer(bytes(raw[off : off + 16]), dtype="<f4") * 0.5
        raw[off : off + 16] = vec.astype("<f4").tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(StoreIntegrityError, match="class 0"):
            load_store(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(StoreFormatError):
            load_store(path)

    def test_bad_version(self, tmp_path):
        store = tiny_store()
        path = tmp_path / "v.rapfemb"
        save_store(store, path)
        raw = bytearray(path.read_bytes())
        raw[8] = 9
        path.write_bytes(bytes(raw))
        with pytest.raises(StoreFormatError, match="version"):
            load_store(path)

    def test_truncated_records(self, tmp_path):
        store = tiny_store()
        path = tmp_path / "trunc.rapfemb"
        save_store(store, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-3])
        with pytest.raises(StoreCorruptionError):
            load_store(path)

    def test_truncated_catalog(self, tmp_path):
        store = tiny_store()
        path = tmp_path / "trunc2.rapfemb"
        save_store(store, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:25])
        with pytest.raises(StoreCorruptionError):
            load_store(path)

    def test_partial_flag(self):
        store = tiny_store()
        # drop class 1's test record
        keep = ~((store.class_ids == 1) & (store.splits == SPLIT_TEST))
        partial = EmbeddingStore(
            catalog=store.catalog,
            class_ids=store.class_ids[keep],
            splits=store.splits[keep],
            vectors=store.vectors[keep],
        )
        assert not store.is_partial
        assert partial.is_partial


class TestSyntheticGenerator:
    def test_zero_spread_limit(self):
        store = make_synthetic(2, 8, 4, 2, 0.0, 0.0, seed=0)
        texts = store.catalog.text_embeddings.astype(np.float64)
        for c in (0, 1):
            t_hat = texts[c] / np.linalg.norm(texts[c])
            for v in store.train_vectors(c).astype(np.float64):
                cos = v @ t_hat / np.linalg.norm(v)
                assert np.arccos(np.clip(cos, -1, 1)) < 1e-6

    def test_determinism(self):
        a = make_synthetic(8, 16, 5, 2, 0.15, 0.5, seed=42)
        b = make_synthetic(8, 16, 5, 2, 0.15, 0.5, seed=42)
        assert np.array_equal(a.vectors, b.vectors)
        assert np.array_equal(a.catalog.text_embeddings, b.catalog.text_embeddings)

    def test_confusable_fraction_plants_pairs(self):
        # oracle: exhaustive distance matrix over the generated catalog
        store = make_synthetic(10, 16, 3, 1, 0.1, 0.5, seed=9)
        texts = store.catalog.text_embeddings.astype(np.float64)
        dist = np.linalg.norm(texts[:, None, :] - texts[None, :, :], axis=2)
        np.fill_diagonal(dist, np.inf)
        with_partner = int(np.sum(dist.min(axis=1) < 0.65))
        assert with_partner >= int(np.ceil(0.5 * 10))

    def test_unplanted_pairs_stay_separated(self):
        store = make_synthetic(12, 32, 3, 1, 0.1, 0.25, seed=4)
        texts = store.catalog.text_embeddings.astype(np.float64)
        dist = np.linalg.norm(texts[:, None, :] - texts[None, :, :], axis=2)
        np.fill_diagonal(dist, np.inf)
        close = dist < 0.65
        # planted pairs are mutual nearest partners; everything else >= 0.8
        assert np.all(dist[~close & (dist < np.inf)] >= store_mod.MIN_SEPARATION - 1e-9)

    def test_unit_norm_catalog_after_load(self, tmp_path):
        store = make_synthetic(6, 8, 3, 1, 0.1, 0.3, seed=1)
        path = tmp_path / "s.rapfemb"
        save_store(store, path)
        loaded = load_store(path)
        norms = np.linalg.norm(loaded.catalog.text_embeddings.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-5)

    def test_rejects_bad_config(self):
        with pytest.raises(ConfigurationError):
            make_synthetic(1, 16, 3, 1, 0.1, 0.0, seed=0)
        with pytest.raises(ConfigurationError):
            make_synthetic(4, 4, 3, 1, 0.1, 0.0, seed=0)
        with pytest.raises(ConfigurationError):
            make_synthetic(4, 16, 1, 1, 0.1, 0.0, seed=0)
        with pytest.raises(ConfigurationError):
            make_synthetic(4, 16, 3, 1, 0.1, 1.5, seed=0)

    def test_split_counts(self):
        store = make_synthetic(5, 8, 7, 3, 0.1, 0.0, seed=6)
        train, test = store.class_counts()
        assert np.all(train == 7)
        assert np.all(test == 3)
        assert store.num_records == 5 * 10
        assert not store.is_partial
