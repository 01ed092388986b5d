"""Datasets, preprocessing, splits and the on-disk formats.

Formats
-------
Feature CSV
    One example per row, comma-separated reals. Loaded transposed, so the
    in-memory matrix is ``D x N``.
Feature binary (``FMX1``)
    ``b"FMX1"``, u32 rows, u32 cols, then rows*cols little-endian float64 in
    column-major order.
Labels
    Newline-delimited integers, one per example.
Model (``SDSN`` v1)
    ``b"SDSN"``, u32 version, u32 activation code (0 sigmoid, 1 relu), u32 K,
    K triples of u32 ``(D_k, L, C)``, then for each layer ``W`` followed by
    ``U`` as little-endian float64 in row-major order, then a u32 CRC32 of
    every preceding byte. All integers little-endian.
"""

from __future__ import annotations

import csv
import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .core import Activation, SnnmModule, StackModel, check_features, validate_stack
from .errors import (
    ChecksumMismatch,
    DataError,
    DimMismatch,
    InsufficientExamples,
    LabelOutOfRange,
    NonFinite,
    ParseError,
    ShapeError,
    VersionUnsupported,
)

FEATURE_MAGIC = b"FMX1"
MODEL_MAGIC = b"SDSN"
MODEL_VERSION = 1
_ACTIVATION_CODES = {Activation.SIGMOID: 0, Activation.RELU: 1}


@dataclass(frozen=True)
class DatasetBundle:
    features: np.ndarray  # D x N
    labels: np.ndarray
    class_count: int
    provenance: str = ""

    def __post_init__(self):
        X = check_features(self.features, "features")
        y = np.asarray(self.labels, dtype=np.int64)
        if y.ndim != 1 or y.size != X.shape[1]:
            raise ShapeError(f"{y.size} labels for {X.shape[1]} examples")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise LabelOutOfRange(f"LabelOutOfRange: labels must lie in [0, {self.class_count})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def size(self):
        return self.labels.size


def infer_format(path, fmt=None):
    if fmt:
        if fmt not in ("csv", "bin"):
            raise ValueError(f"unknown feature format {fmt!r}")
        return fmt
    return "bin" if str(path).endswith((".bin", ".fmx")) else "csv"


def _load_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    x = float(cell)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: column {col}: cannot parse {cell!r}") from None
                if not math.isfinite(x):
                    raise NonFinite(f"{path}:{lineno}: column {col}: non-finite value {cell.strip()!r}")
                values.append(x)
            if rows and len(values) != len(rows[0]):
                raise ShapeError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise ShapeError(f"{path}: no examples")
    return np.array(rows, dtype=np.float64).T


def _load_bin(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != FEATURE_MAGIC:
        raise ParseError(f"{path}: missing FMX1 header")
    rows, cols = struct.unpack_from("<II", data, 4)
    expected = 12 + 8 * rows * cols
    if len(data) != expected:
        raise ShapeError(f"{path}: header declares {rows}x{cols}, payload is {len(data) - 12} bytes")
    X = np.frombuffer(data, dtype="<f8", offset=12).reshape((rows, cols), order="F")
    bad = ~np.isfinite(X)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFinite(f"{path}: non-finite value at row {r}, column {c} "
                        f"(byte offset {12 + 8 * (c * rows + r)})")
    return X.astype(np.float64)


def load_features(path, fmt=None):
    """Read a ``D x N`` feature matrix from CSV or FMX1 binary."""
    if infer_format(path, fmt) == "csv":
        X = _load_csv(path)
    else:
        X = _load_bin(path)
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ShapeError(f"{path}: empty feature matrix")
    return X


def save_features(path, X, fmt=None):
    X = check_features(X)
    if infer_format(path, fmt) == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for col in X.T:
                w.writerow([repr(float(v)) for v in col])
    else:
        with open(path, "wb") as fh:
            fh.write(FEATURE_MAGIC + struct.pack("<II", *X.shape))
            fh.write(X.astype("<f8").tobytes(order="F"))


def load_labels(path):
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not an integer label: {line!r}") from None
    if not labels:
        raise ShapeError(f"{path}: no labels")
    return np.array(labels, dtype=np.int64)


def save_labels(path, labels):
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


def load_dataset(features_path, labels_path, fmt=None, class_count=None):
    X = load_features(features_path, fmt)
    y = load_labels(labels_path)
    if y.size != X.shape[1]:
        raise ShapeError(f"{y.size} labels for {X.shape[1]} examples")
    if y.min() < 0:
        raise LabelOutOfRange("LabelOutOfRange: negative label")
    C = int(y.max()) + 1 if class_count is None else int(class_count)
    return DatasetBundle(X, y, C, provenance=f"{features_path}")


def model_to_bytes(model):
    out = bytearray(MODEL_MAGIC)
    act = model.modules[0].activation if model.modules else Activation.SIGMOID
    out += struct.pack("<III", MODEL_VERSION, _ACTIVATION_CODES[act], model.layers)
    for m in model.modules:
        out += struct.pack("<III", m.W.shape[0], m.W.shape[1], m.U.shape[1])
    for m in model.modules:
        out += m.W.astype("<f8").tobytes(order="C")
        out += m.U.astype("<f8").tobytes(order="C")
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


def save_model(path, model):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def model_from_bytes(data):
    if len(data) < 4 or data[:4] != MODEL_MAGIC:
        raise ParseError("not an SDSN model file")
    if len(data) < 20:
        raise ChecksumMismatch("ChecksumMismatch: file truncated")
    payload, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != crc:
        raise ChecksumMismatch("ChecksumMismatch: model file is corrupted or truncated")
    version, act_code, K = struct.unpack_from("<III", payload, 4)
    if version != MODEL_VERSION:
        raise VersionUnsupported(f"VersionUnsupported: model format version {version}")
    codes = {v: k for k, v in _ACTIVATION_CODES.items()}
    if act_code not in codes:
        raise DataError(f"unknown activation code {act_code}")
    if K < 1:
        raise DimMismatch("model has no layers")
    off = 16
    if len(payload) < off + 12 * K:
        raise DimMismatch("header shorter than its layer table")
    dims = [struct.unpack_from("<III", payload, off + 12 * k) for k in range(K)]
    off += 12 * K
    need = off + 8 * sum(d * l + l * c for d, l, c in dims)
    if need != len(payload):
        raise DimMismatch("declared dimensions do not match payload size",
                          expected=need, found=len(payload))
    modules = []
    for d, l, c in dims:
        W = np.frombuffer(payload, "<f8", d * l, off).reshape(d, l)
        off += 8 * d * l
        U = np.frombuffer(payload, "<f8", l * c, off).reshape(l, c)
        off += 8 * l * c
        modules.append(SnnmModule(W, U, codes[act_code]))
    model = StackModel(input_dim=dims[0][0], class_count=dims[0][2], modules=modules)
    validate_stack(model)
    return model


def load_model(path):
    """Read an SDSN v1 model, verifying the checksum and the stack wiring."""
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def random_projection(X, n, seed):
    """Project ``X`` (D x N) to ``n`` dims with a N(0, 1/D) Gaussian matrix."""
    X = np.asarray(X, dtype=np.float64)
    if n < 1:
        raise ValueError("target dimension must be >= 1")
    D = X.shape[0]
    R = np.random.default_rng(seed).standard_normal((int(n), D)) / np.sqrt(D)
    return R @ X


def normalize_columns(X):
    """Scale each column by its max absolute entry so values lie in [-1, 1]."""
    X = np.asarray(X, dtype=np.float64)
    peak = np.abs(X).max(axis=0)
    return np.divide(X, peak, out=X.copy(), where=peak > 0)


def synth_blobs(C, D, per_class, separation, noise_sd, seed):
    """Isotropic Gaussian clusters with centers at distance ``separation`` from 0.

    Examples are ordered class by class.
    """
    if min(C, D, per_class) < 1 or not separation > 0:
        raise ValueError("counts must be >= 1 and separation > 0")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((D, C))
    dirs /= np.linalg.norm(dirs, axis=0)
    labels = np.repeat(np.arange(C), per_class)
    X = separation * dirs[:, labels] + noise_sd * rng.standard_normal((D, C * per_class))
    prov = f"synth_blobs(C={C}, D={D}, per_class={per_class}, separation={separation}, " \
           f"noise_sd={noise_sd}, seed={seed})"
    return DatasetBundle(X, labels, C, provenance=prov)


def split(bundle, train_per_class=None, train_fraction=None, seed=0):
    """Class-stratified random split without replacement.

    Exactly one of ``train_per_class`` or ``train_fraction`` must be given.
    Every class must keep at least one example on each side.
    """
    if (train_per_class is None) == (train_fraction is None):
        raise ValueError("give exactly one of train_per_class or train_fraction")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(bundle.class_count):
        idx = np.flatnonzero(bundle.labels == c)
        if idx.size == 0:
            continue
        if train_per_class is not None:
            n = int(train_per_class)
        else:
            n = int(round(train_fraction * idx.size))
        if n < 1 or n >= idx.size:
            raise InsufficientExamples(c, idx.size, n)
        idx = rng.permutation(idx)
        train_idx.append(idx[:n])
        test_idx.append(idx[n:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))

    def take(ix, tag):
        return DatasetBundle(bundle.features[:, ix], bundle.labels[ix], bundle.class_count,
                             provenance=f"{bundle.provenance} [{tag} split, seed={seed}]")

    return take(tr, "train"), take(te, "test")
