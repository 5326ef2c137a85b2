"""Dataset ingestion, synthetic ground truth and model persistence."""

from __future__ import annotations

import csv
import gzip
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from urllib.parse import parse_qs

import numpy as np

from .activation import Activation
from .exceptions import DataError, ShapeError
from .linalg import normalize_columns
from .model import DdlModel, synthesize
from .rng import XorShift64Star

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MODEL_MAGIC = "DDLM"
MODEL_VERSION = 1


@dataclass
class LabeledSet:
    """Samples as columns of ``features`` plus optional integer labels."""

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.features.shape[1],):
                raise ShapeError(
                    f"{self.labels.size} labels for {self.features.shape[1]} samples"
                )
            if self.labels.size and self.labels.min() < 0:
                raise DataError("class ids must be >= 0")

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledSet":
        idx = np.asarray(idx, dtype=np.intp)
        return LabeledSet(
            self.features[:, idx], None if self.labels is None else self.labels[idx]
        )


def _read_bytes(path) -> bytes:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise DataError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def _idx_header(raw: bytes, path, magic: int, n_dims: int) -> tuple[int, ...]:
    header_len = 4 + 4 * n_dims
    if len(raw) < 4:
        raise DataError(f"{path}: truncated file, no magic number at offset 0")
    found = struct.unpack_from(">I", raw, 0)[0]
    if found != magic:
        raise DataError(f"{path}: bad magic 0x{found:08x} at offset 0, expected 0x{magic:08x}")
    if len(raw) < header_len:
        raise DataError(f"{path}: truncated header, expected {header_len} bytes, got {len(raw)}")
    dims = struct.unpack_from(f">{n_dims}I", raw, 4)
    expected = header_len + int(np.prod(dims))
    if len(raw) < expected:
        raise DataError(f"{path}: truncated payload, expected {expected} bytes, got {len(raw)}")
    return dims


NORMALIZATIONS = ("scale", "none", "l2")


def l2_normalize_samples(features: np.ndarray) -> np.ndarray:
    """Scale every nonzero column to unit l2 norm; zero columns stay zero."""
    norms = np.linalg.norm(features, axis=0)
    norms[norms == 0] = 1.0
    return features / norms


def read_idx(images_path, labels_path, normalization: str = "scale", limit: int | None = None) -> LabeledSet:
    """Read an IDX image/label pair (optionally gzipped) into a :class:`LabeledSet`.

    Image ``i`` is flattened row-major into column ``i``. With
    ``normalization="scale"`` pixels are divided by 255; ``"l2"`` further
    scales every image to unit l2 norm, which keeps first-level
    coefficients inside the tanh range.
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    img_raw = _read_bytes(images_path)
    lbl_raw = _read_bytes(labels_path)
    n, rows, cols = _idx_header(img_raw, images_path, IDX_IMAGES_MAGIC, 3)
    (n_labels,) = _idx_header(lbl_raw, labels_path, IDX_LABELS_MAGIC, 1)
    if n != n_labels:
        raise DataError(f"{images_path} holds {n} images but {labels_path} holds {n_labels} labels")
    if limit is not None:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        n = min(n, limit)
    pixels = np.frombuffer(img_raw, dtype=np.uint8, count=n * rows * cols, offset=16)
    features = pixels.reshape(n, rows * cols).T.astype(np.float64)
    if normalization != "none":
        features /= 255.0
    if normalization == "l2":
        features = l2_normalize_samples(features)
    labels = np.frombuffer(lbl_raw, dtype=np.uint8, count=n, offset=8).astype(np.int64)
    return LabeledSet(features, labels)


def write_idx(images_path, labels_path, images: np.ndarray, labels: Sequence[int]) -> None:
    """Write ``images`` of shape ``(n, rows, cols)`` (uint8) and labels as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        f.write(labels.tobytes())


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_csv_matrix(path, label_column: str | int | None = None) -> LabeledSet:
    """Read a numeric CSV whose rows are samples; returns features as columns.

    A first row containing any non-numeric cell is treated as a header.
    ``label_column`` is a header name or a 0-based column index.
    """
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    width = len(header) if header else len(rows[0]) if rows else 0
    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise DataError(f"{path}: no column named {label_column!r}")
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column)
            if not 0 <= label_idx < width:
                raise DataError(f"{path}: label column {label_idx} out of range for width {width}")
    values = np.empty((len(rows), width))
    first_line = 2 if header else 1
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: line {r + first_line} has {len(row)} cells, expected {width}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at line {r + first_line}, column {c + 1}"
                ) from None
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite values")
    labels = None
    if label_idx is not None:
        lab = values[:, label_idx]
        if np.any(lab != np.round(lab)):
            raise DataError(f"{path}: label column holds non-integer values")
        labels = lab.astype(np.int64)
        values = np.delete(values, label_idx, axis=1)
    return LabeledSet(values.T.copy(), labels)


def write_csv_matrix(path, features: np.ndarray, labels: Sequence[int] | None = None,
                     prefix: str = "f") -> None:
    """Write samples (columns of ``features``) as CSV rows with 17 significant digits."""
    features = np.asarray(features, dtype=np.float64)
    dim = features.shape[0]
    header = [f"{prefix}{i}" for i in range(dim)]
    if labels is not None:
        header.append("label")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for j in range(features.shape[1]):
            row = [format(v, ".17g") for v in features[:, j]]
            if labels is not None:
                row.append(str(int(labels[j])))
            w.writerow(row)


@dataclass
class SyntheticSpec:
    input_dim: int
    layer_atoms: Sequence[int]
    n_samples: int
    activation: Activation | str = Activation.TANH
    coef_scale: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.layer_atoms = tuple(int(k) for k in self.layer_atoms)
        self.activation = Activation.parse(self.activation)
        if self.input_dim < 1 or self.n_samples < 1 or not self.layer_atoms or min(self.layer_atoms) < 1:
            raise ShapeError("synthetic widths and sample count must be positive")
        if not self.coef_scale > 0:
            raise ValueError("coef_scale must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @classmethod
    def from_text(cls, text: str) -> "SyntheticSpec":
        """Parse JSON (``{"input_dim": 50, ...}``) or ``key=value`` pairs separated by ``;`` or whitespace.

        Layer widths in the key=value form are comma separated: ``layer_atoms=25,12``.
        """
        text = text.strip()
        if text.startswith("{"):
            try:
                fields = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DataError(f"bad synthetic spec: {exc}") from exc
        else:
            fields = {}
            for part in text.replace(";", " ").split():
                key, sep, value = part.partition("=")
                if not sep:
                    raise DataError(f"bad synthetic spec entry {part!r}, expected key=value")
                fields[key.strip()] = value.strip()
            if "layer_atoms" in fields:
                fields["layer_atoms"] = [int(v) for v in fields["layer_atoms"].split(",")]
            for key in ("input_dim", "n_samples", "seed"):
                if key in fields:
                    fields[key] = int(fields[key])
            for key in ("coef_scale", "noise_sigma"):
                if key in fields:
                    fields[key] = float(fields[key])
        try:
            return cls(**fields)
        except TypeError as exc:
            raise DataError(f"bad synthetic spec: {exc}") from exc


def gen_synthetic(spec: SyntheticSpec) -> tuple[np.ndarray, DdlModel, np.ndarray]:
    """Draw ``(X, ground_truth_model, Z_true)`` from the portable generator.

    Dictionaries (in level order) are uniform(-1, 1) then column-normalized,
    ``Z_true`` is standard normal times ``coef_scale`` and ``X`` is the
    forward synthesis plus gaussian noise of scale ``noise_sigma``.
    """
    rng = XorShift64Star(spec.seed)
    dims = (spec.input_dim,) + tuple(spec.layer_atoms)
    dicts = tuple(
        normalize_columns(rng.uniform(-1.0, 1.0, (dims[i], dims[i + 1])))
        for i in range(len(spec.layer_atoms))
    )
    model = DdlModel(dicts, spec.activation)
    z_true = rng.normal((dims[-1], spec.n_samples)) * spec.coef_scale
    x = synthesize(model, z_true)
    if spec.noise_sigma > 0:
        x = x + spec.noise_sigma * rng.normal(x.shape)
    return x, model, z_true


def save_model(model: DdlModel, path) -> None:
    """Write ``model`` as a text header followed by little-endian float64 matrices."""
    lines = [
        MODEL_MAGIC,
        f"version {MODEL_VERSION}",
        f"activation {model.activation.value}",
        f"levels {model.n_levels}",
    ]
    lines += [f"shape {i + 1} {d.shape[0]} {d.shape[1]}" for i, d in enumerate(model.dicts)]
    lines.append("data")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        for d in model.dicts:
            f.write(np.ascontiguousarray(d, dtype="<f8").tobytes())


def load_model(path) -> DdlModel:
    raw = Path(path).read_bytes()
    buf = io.BytesIO(raw)

    def line(expect: str) -> list[str]:
        text = buf.readline()
        try:
            parts = text.decode("ascii").split()
        except UnicodeDecodeError:
            parts = []
        if not parts or parts[0] != expect:
            raise DataError(f"{path}: corrupt header, expected {expect!r} line, got {text[:40]!r}")
        return parts

    line(MODEL_MAGIC)
    try:
        version = int(line("version")[1])
        if version != MODEL_VERSION:
            raise DataError(f"{path}: unsupported model format version {version} (supported: {MODEL_VERSION})")
        kind = Activation.parse(line("activation")[1])
        n_levels = int(line("levels")[1])
        shapes = []
        for i in range(n_levels):
            parts = line("shape")
            if int(parts[1]) != i + 1:
                raise DataError(f"{path}: corrupt header, shape lines out of order")
            shapes.append((int(parts[2]), int(parts[3])))
    except (IndexError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: corrupt header ({exc})") from exc
    line("data")
    payload = raw[buf.tell():]
    expected = 8 * sum(r * c for r, c in shapes)
    if len(payload) != expected:
        raise DataError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    dicts = []
    offset = 0
    for r, c in shapes:
        d = np.frombuffer(payload, dtype="<f8", count=r * c, offset=offset).reshape(r, c)
        dicts.append(d.astype(np.float64))
        offset += 8 * r * c
    return DdlModel(tuple(dicts), kind)


def balanced_indices(labels: np.ndarray, per_class: int, block: int = 0, seed: int = 0) -> np.ndarray:
    """Seeded class-balanced selection: block ``block`` of ``per_class`` samples from every class.

    Different ``block`` values with the same seed give disjoint subsets.
    """
    rng = np.random.default_rng(seed)
    chosen = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = idx[rng.permutation(idx.size)]
        part = perm[block * per_class:(block + 1) * per_class]
        if part.size < per_class:
            raise DataError(f"class {c} has only {idx.size} samples, cannot take block {block} of {per_class}")
        chosen.append(part)
    return np.sort(np.concatenate(chosen))


@dataclass
class DatasetSpec:
    """Parsed form of a dataset argument such as ``idx:IMAGES,LABELS?per_class=100``.

    Sources: ``idx:IMAGES,LABELS``, ``csv:PATH`` (or a bare ``*.csv`` path),
    ``synth:SPEC``. Options after ``?``: ``label`` (CSV label column),
    ``norm`` (``scale``, ``none`` or ``l2``; for CSV ``scale`` is a no-op),
    ``limit`` (first N samples),
    ``per_class``/``block``/``seed`` (seeded class-balanced subset).
    """

    source: str
    paths: list[str] = field(default_factory=list)
    synthetic: SyntheticSpec | None = None
    label_column: str | None = None
    normalization: str = "scale"
    limit: int | None = None
    per_class: int | None = None
    block: int = 0
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> "DatasetSpec":
        kind, sep, rest = text.partition(":")
        if not sep or kind not in ("idx", "csv", "synth"):
            if text.lower().endswith(".csv") or "?" in text and text.split("?")[0].lower().endswith(".csv"):
                kind, rest = "csv", text
            else:
                raise DataError(f"cannot parse dataset {text!r}; use idx:IMG,LBL, csv:PATH or synth:SPEC")
        if kind == "synth":
            return cls("synth", synthetic=SyntheticSpec.from_text(rest))
        location, _, query = rest.partition("?")
        opts = {k: v[-1] for k, v in parse_qs(query, keep_blank_values=True).items()}
        known = {"label", "norm", "limit", "per_class", "block", "seed"}
        unknown = set(opts) - known
        if unknown:
            raise DataError(f"unknown dataset options: {', '.join(sorted(unknown))}")
        paths = location.split(",") if kind == "idx" else [location]
        if kind == "idx" and len(paths) != 2:
            raise DataError("idx datasets need IMAGES,LABELS paths")
        norm = opts.get("norm", "scale")
        if norm not in NORMALIZATIONS:
            raise DataError(f"unknown normalization {norm!r}; expected one of {', '.join(NORMALIZATIONS)}")
        try:
            return cls(
                kind,
                paths=paths,
                label_column=opts.get("label"),
                normalization=norm,
                limit=int(opts["limit"]) if "limit" in opts else None,
                per_class=int(opts["per_class"]) if "per_class" in opts else None,
                block=int(opts.get("block", 0)),
                seed=int(opts.get("seed", 0)),
            )
        except ValueError as exc:
            raise DataError(f"bad dataset option in {text!r}: {exc}") from exc

    def load(self) -> LabeledSet:
        try:
            if self.source == "idx":
                data = read_idx(self.paths[0], self.paths[1], self.normalization)
            elif self.source == "csv":
                data = read_csv_matrix(self.paths[0], self.label_column)
                if self.normalization == "l2":
                    data.features = l2_normalize_samples(data.features)
            else:
                x, _, _ = gen_synthetic(self.synthetic)
                data = LabeledSet(x)
        except OSError as exc:
            raise DataError(str(exc)) from exc
        if self.per_class is not None:
            if data.labels is None:
                raise DataError("per_class selection needs labels")
            data = data.subset(balanced_indices(data.labels, self.per_class, self.block, self.seed))
        if self.limit is not None:
            data = data.subset(np.arange(min(self.limit, data.n_samples)))
        return data


def load_dataset(text: str) -> LabeledSet:
    return DatasetSpec.parse(text).load()
