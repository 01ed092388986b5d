import struct
import zlib

import numpy as np
import pytest

from sdsn.core import HyperParams, SnnmModule, StackModel, one_hot_encode
from sdsn.data_io import (
    DatasetBundle,
    load_dataset,
    load_features,
    load_labels,
    load_model,
    model_to_bytes,
    normalize_columns,
    random_projection,
    save_features,
    save_labels,
    save_model,
    split,
    synth_blobs,
)
from sdsn.errors import (
    ChecksumMismatch,
    DimMismatch,
    InsufficientExamples,
    NonFinite,
    ParseError,
    ShapeError,
    VersionUnsupported,
)
from sdsn.trainer import predict, train_stack


def test_csv_is_transposed(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("0,0,0\n0,0,0\n")
    X = load_features(p)
    assert X.shape == (3, 2) and not X.any()


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_feature_round_trip(tmp_path, fmt):
    X = np.random.default_rng(0).standard_normal((4, 7)) * 1e3
    p = tmp_path / f"x.{fmt}"
    save_features(p, X, fmt)
    assert load_features(p, fmt).tobytes() == X.tobytes()


def test_bin_layout(tmp_path):
    X = np.arange(6.0).reshape(2, 3)
    p = tmp_path / "x.bin"
    save_features(p, X)
    data = p.read_bytes()
    assert data[:4] == b"FMX1"
    assert struct.unpack("<II", data[4:12]) == (2, 3)
    # column-major: first column (0, 3) comes first
    assert struct.unpack("<6d", data[12:]) == (0.0, 3.0, 1.0, 4.0, 2.0, 5.0)


def test_csv_nan_located(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2\n3,NaN\n")
    with pytest.raises(NonFinite, match=r":2: column 2"):
        load_features(p)


def test_csv_parse_and_shape_errors(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2\n3,abc\n")
    with pytest.raises(ParseError, match=":2"):
        load_features(p)
    p.write_text("1,2\n3\n")
    with pytest.raises(ShapeError):
        load_features(p)


def test_bin_nonfinite_and_truncated(tmp_path):
    p = tmp_path / "x.bin"
    X = np.ones((2, 2))
    X[1, 0] = np.inf
    p.write_bytes(b"FMX1" + struct.pack("<II", 2, 2) + X.tobytes(order="F"))
    with pytest.raises(NonFinite, match="row 1, column 0"):
        load_features(p)
    p.write_bytes(b"FMX1" + struct.pack("<II", 2, 2) + b"\0" * 16)
    with pytest.raises(ShapeError):
        load_features(p)


def test_labels_round_trip(tmp_path):
    p = tmp_path / "y.txt"
    save_labels(p, [0, 2, 1])
    assert p.read_text() == "0\n2\n1\n"
    np.testing.assert_array_equal(load_labels(p), [0, 2, 1])


def test_dataset_mismatch(tmp_path):
    save_features(tmp_path / "x.csv", np.zeros((2, 3)))
    save_labels(tmp_path / "y.txt", [0, 1])
    with pytest.raises(ShapeError):
        load_dataset(tmp_path / "x.csv", tmp_path / "y.txt")


@pytest.fixture(scope="module")
def trained():
    b = synth_blobs(3, 6, 20, 4.0, 1.0, 1)
    model, _ = train_stack(b.features, one_hot_encode(b.labels, 3).onehot,
                           HyperParams(hidden=8, groups=2, layers=2))
    return model, b.features


def test_model_round_trip(tmp_path, trained):
    model, X = trained
    p = tmp_path / "m.sdsn"
    save_model(p, model)
    loaded = load_model(p)
    for a, b in zip(model.modules, loaded.modules):
        assert a.W.tobytes() == b.W.tobytes() and a.U.tobytes() == b.U.tobytes()
        assert a.activation == b.activation
    np.testing.assert_array_equal(predict(loaded, X), predict(model, X))
    assert model_to_bytes(loaded) == p.read_bytes()


def test_model_header(trained):
    model, _ = trained
    data = model_to_bytes(model)
    assert data[:4] == b"SDSN"
    assert struct.unpack_from("<III", data, 4) == (1, 0, 2)
    assert struct.unpack_from("<6I", data, 16) == (6, 8, 3, 9, 8, 3)
    assert struct.unpack("<I", data[-4:])[0] == zlib.crc32(data[:-4])


def test_model_truncated(tmp_path, trained):
    p = tmp_path / "m.sdsn"
    p.write_bytes(model_to_bytes(trained[0])[:-10])
    with pytest.raises(ChecksumMismatch):
        load_model(p)


def test_model_bit_flip(tmp_path, trained):
    data = bytearray(model_to_bytes(trained[0]))
    data[100] ^= 0x01
    p = tmp_path / "m.sdsn"
    p.write_bytes(bytes(data))
    with pytest.raises(ChecksumMismatch):
        load_model(p)


def _rechecksum(data):
    return data[:-4] + struct.pack("<I", zlib.crc32(data[:-4]))


def test_model_corrupted_dim_field(tmp_path):
    # second module declares D inputs instead of D + C; payload and checksum consistent
    rng = np.random.default_rng(0)
    bad = StackModel(4, 2, [SnnmModule(rng.standard_normal((4, 3)), rng.standard_normal((3, 2))),
                            SnnmModule(rng.standard_normal((4, 3)), rng.standard_normal((3, 2)))])
    p = tmp_path / "m.sdsn"
    save_model(p, bad)
    with pytest.raises(DimMismatch) as exc:
        load_model(p)
    assert exc.value.layer == 2


def test_model_dim_field_vs_payload(tmp_path, trained):
    data = bytearray(model_to_bytes(trained[0]))
    struct.pack_into("<I", data, 16, 7)  # layer 1 D: 6 -> 7
    p = tmp_path / "m.sdsn"
    p.write_bytes(_rechecksum(bytes(data)))
    with pytest.raises(DimMismatch):
        load_model(p)


def test_model_version(tmp_path, trained):
    data = bytearray(model_to_bytes(trained[0]))
    struct.pack_into("<I", data, 4, 2)
    p = tmp_path / "m.sdsn"
    p.write_bytes(_rechecksum(bytes(data)))
    with pytest.raises(VersionUnsupported):
        load_model(p)


def test_random_projection():
    X = np.random.default_rng(0).standard_normal((30, 5))
    assert random_projection(X, 504, 1).shape == (504, 5)
    assert random_projection(X, 540, 1).shape == (540, 5)
    np.testing.assert_array_equal(random_projection(X, 20, 3), random_projection(X, 20, 3))
    np.testing.assert_array_equal(random_projection(np.zeros((30, 5)), 20, 3), 0)


def test_random_projection_preserves_energy_on_average():
    X = np.random.default_rng(0).standard_normal((400, 200))
    P = random_projection(X, 400, 2)
    assert 0.9 < np.sum(P ** 2) / np.sum(X ** 2) < 1.1


def test_normalize_columns():
    X = np.array([[2.0, 0.5, 0.0], [-4.0, -1.0, 0.0]])
    np.testing.assert_array_equal(normalize_columns(X), [[0.5, 0.5, 0.0], [-1.0, -1.0, 0.0]])


def test_blobs_noise_free_classes_identical():
    b = synth_blobs(3, 5, 4, 2.0, 0.0, 0)
    for c in range(3):
        cols = b.features[:, b.labels == c]
        assert np.all(cols == cols[:, :1])


def test_blobs_centroid_oracle():
    b = synth_blobs(6, 20, 50, 10.0, 1.0, 4)
    centers = np.stack([b.features[:, b.labels == c].mean(axis=1) for c in range(6)], axis=1)
    dist = ((b.features[:, :, None] - centers[:, None, :]) ** 2).sum(axis=0)
    assert np.mean(dist.argmin(axis=1) == b.labels) == 1.0


def test_blobs_reproducible():
    a, b = synth_blobs(3, 4, 5, 1.0, 1.0, 9), synth_blobs(3, 4, 5, 1.0, 1.0, 9)
    assert a.features.tobytes() == b.features.tobytes()


def test_split_stratified_and_exhaustive():
    labels = np.repeat(np.arange(4), 64)
    b = DatasetBundle(np.random.default_rng(0).standard_normal((3, 256)), labels, 4)
    tr, te = split(b, train_per_class=32, seed=1)
    assert np.all(np.bincount(tr.labels) == 32) and np.all(np.bincount(te.labels) == 32)
    cols = np.concatenate([tr.features, te.features], axis=1)
    assert sorted(map(tuple, cols.T)) == sorted(map(tuple, b.features.T))
    tr2, _ = split(b, train_per_class=32, seed=1)
    assert tr2.features.tobytes() == tr.features.tobytes()


def test_split_fraction_and_insufficient():
    b = DatasetBundle(np.zeros((2, 10)), np.repeat([0, 1], 5), 2)
    tr, te = split(b, train_fraction=0.6, seed=0)
    assert tr.size == 6 and te.size == 4
    with pytest.raises(InsufficientExamples):
        split(b, train_per_class=5, seed=0)
