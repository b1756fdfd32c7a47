"""Reading features and manifests, writing kernels and JSON reports.

Feature files are either NPY v1.0 (little-endian, C-order, 2-D) or CSV.
Reports share one JSON envelope::

    {"schema_version": 1, "kind": ..., "params": {...}, "payload": ...}
"""

from __future__ import annotations

import ast
import csv
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, IoError, MalformedHeader, NonFinite, ShapeMismatch

SCHEMA_VERSION = 1

NPY_MAGIC = b"\x93NUMPY"
_FLOAT_DESCR = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}
# Integer payloads are accepted only when every value survives the trip to float64.
_INT_DESCR = {
    d: np.dtype(d)
    for d in ("|i1", "|u1", "<i1", "<u1", "<i2", "<u2", "<i4", "<u4", "<i8", "<u8")
}


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """N x D embedding matrix, one row per sample."""

    data: np.ndarray
    sample_ids: tuple = ()
    model_id: str = ""

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DimensionError(f"features must be 2-D, got ndim={data.ndim}")
        if data.shape[0] < 2 or data.shape[1] < 1:
            raise DimensionError(f"features need N >= 2 and D >= 1, got shape {data.shape}")
        data = np.ascontiguousarray(data, dtype=np.float64)
        _check_finite(data, self.model_id or None)
        ids = tuple(str(s) for s in self.sample_ids) if len(self.sample_ids) else tuple(
            str(i) for i in range(data.shape[0])
        )
        if len(ids) != data.shape[0]:
            raise ShapeMismatch(f"{len(ids)} sample ids for {data.shape[0]} rows")
        if len(set(ids)) != len(ids):
            raise ValueError("sample_ids must be unique")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True)
class ManifestEntry:
    model_id: str
    path: Path
    format: str = "npy"


@dataclass(frozen=True)
class DatasetManifest:
    """A set of feature files for different models over the same samples."""

    entries: tuple
    sample_ids: tuple = ()

    @property
    def model_ids(self):
        return tuple(e.model_id for e in self.entries)

    def entry(self, model_id):
        for e in self.entries:
            if e.model_id == model_id:
                return e
        return None

    def load_all(self):
        """Load every entry, checking that all share N and sample order."""
        out = {}
        ref = None
        for e in self.entries:
            fm = load_features(e.path, e.format, model_id=e.model_id)
            if self.sample_ids and fm.n != len(self.sample_ids):
                raise ShapeMismatch(
                    f"{e.path}: {fm.n} rows but manifest lists {len(self.sample_ids)} samples"
                )
            if self.sample_ids and e.format == "csv" and fm.sample_ids != tuple(self.sample_ids):
                raise ShapeMismatch(f"{e.path}: sample_id order differs from manifest")
            if ref is not None:
                ref_path, ref_fm = ref
                if fm.n != ref_fm.n:
                    raise ShapeMismatch(
                        f"{e.path} has shape {fm.data.shape} but {ref_path} has shape {ref_fm.data.shape}"
                    )
            else:
                ref = (e.path, fm)
            out[e.model_id] = fm
        if self.sample_ids:
            ids = tuple(str(s) for s in self.sample_ids)
            out = {
                k: FeatureMatrix(v.data, ids, v.model_id) for k, v in out.items()
            }
        return out


def _check_finite(data, source=None):
    bad = ~np.isfinite(data)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFinite(r, c, source)


# --------------------------------------------------------------------------
# NPY

def read_npy(path):
    """Parse an NPY v1.0 file into a float64 2-D array.

    Only little-endian ``<f4``/``<f8`` (and integer types that convert
    exactly) in C order are accepted.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw[:6] != NPY_MAGIC:
        raise MalformedHeader(f"{path}: bad magic {raw[:6]!r}")
    if len(raw) < 10:
        raise MalformedHeader(f"{path}: truncated header")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise MalformedHeader(f"{path}: unsupported NPY version {major}.{minor}")
    (hlen,) = struct.unpack("<H", raw[8:10])
    header_end = 10 + hlen
    if len(raw) < header_end:
        raise MalformedHeader(f"{path}: truncated header")
    try:
        header = ast.literal_eval(raw[10:header_end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise MalformedHeader(f"{path}: unparsable header dict") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise MalformedHeader(f"{path}: header must have exactly descr, fortran_order, shape")
    descr, fortran, shape = header["descr"], header["fortran_order"], header["shape"]
    if fortran is not False:
        raise MalformedHeader(f"{path}: fortran_order arrays are not supported")
    if not isinstance(shape, tuple) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise MalformedHeader(f"{path}: bad shape {shape!r}")
    if descr in _FLOAT_DESCR:
        dtype = _FLOAT_DESCR[descr]
    elif descr in _INT_DESCR:
        dtype = _INT_DESCR[descr]
    else:
        raise MalformedHeader(f"{path}: unsupported dtype descr {descr!r}")
    if len(shape) != 2:
        raise DimensionError(f"{path}: expected a 2-D array, got shape {shape}")
    count = shape[0] * shape[1]
    body = raw[header_end:]
    if len(body) != count * dtype.itemsize:
        raise MalformedHeader(
            f"{path}: payload has {len(body)} bytes, shape {shape} needs {count * dtype.itemsize}"
        )
    arr = np.frombuffer(body, dtype=dtype, count=count).reshape(shape)
    out = arr.astype(np.float64)
    if dtype.kind in "iu" and not np.array_equal(out.astype(dtype), arr):
        raise MalformedHeader(f"{path}: integer payload not exactly representable as float64")
    return out


def write_npy(path, array):
    """Write a 2-D float64 array as NPY v1.0 (``<f8``, C order)."""
    arr = np.ascontiguousarray(array, dtype="<f8")
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D array, got ndim={arr.ndim}")
    header = "{'descr': '<f8', 'fortran_order': False, 'shape': %r, }" % (tuple(arr.shape),)
    # pad so magic + len + header + newline is a multiple of 64
    pad = -(10 + len(header) + 1) % 64
    header_bytes = (header + " " * pad + "\n").encode("latin1")
    blob = NPY_MAGIC + bytes([1, 0]) + struct.pack("<H", len(header_bytes)) + header_bytes + arr.tobytes()
    _atomic_write(Path(path), blob)


# --------------------------------------------------------------------------
# CSV

def read_csv(path):
    """Return (data, sample_ids) from a CSV feature file.

    A header row is detected when its first field does not parse as a
    number. If that header's first field is ``id`` the first column holds
    sample ids.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DimensionError(f"{path}: empty CSV")
    has_header = not _is_number(rows[0][0])
    id_col = has_header and rows[0][0].strip() == "id"
    body = rows[1:] if has_header else rows
    ids = []
    values = []
    width = None
    for lineno, row in enumerate(body):
        if id_col:
            ids.append(row[0].strip())
            row = row[1:]
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DimensionError(f"{path}: ragged row {lineno} ({len(row)} vs {width} fields)")
        try:
            # float() is locale independent
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise MalformedHeader(f"{path}: row {lineno}: {exc}") from exc
    data = np.asarray(values, dtype=np.float64).reshape(len(values), width or 0)
    return data, tuple(ids)


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_features(path, format=None, model_id=None):
    """Load a feature matrix from ``.npy`` or ``.csv``.

    ``format`` defaults to the file extension. Integer data is promoted to
    float64; NaN/Inf raise :class:`NonFinite` with the offending position.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if not path.exists():
        raise IoError(f"no such file: {path}")
    if fmt == "npy":
        data, ids = read_npy(path), ()
    elif fmt == "csv":
        data, ids = read_csv(path)
    else:
        raise ValueError(f"unknown feature format {fmt!r} (expected npy or csv)")
    _check_finite(data, str(path))
    return FeatureMatrix(data, ids, model_id if model_id is not None else path.stem)


def load_manifest(path):
    """Read a JSON manifest.

    Expected layout::

        {"sample_ids": [...],                      # optional
         "entries": [{"model_id": "a", "path": "a.npy", "format": "npy"}, ...]}

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    entries = []
    for e in doc["entries"]:
        p = Path(e["path"])
        if not p.is_absolute():
            p = path.parent / p
        fmt = e.get("format") or p.suffix.lstrip(".")
        entries.append(ManifestEntry(str(e["model_id"]), p, fmt))
    ids = {e.model_id for e in entries}
    if len(ids) != len(entries):
        raise ValueError(f"{path}: duplicate model_id in manifest")
    return DatasetManifest(tuple(entries), tuple(doc.get("sample_ids", ())))


# --------------------------------------------------------------------------
# JSON reports

def _atomic_write(path, blob):
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise IoError(f"directory does not exist: {parent}")
    try:
        fd, tmp = tempfile.mkstemp(dir=parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(blob)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _kinds():
    from .evaluation import ComparisonReport
    from .kernel import KernelMeta
    from .prior import TaskStats
    from .probe import ProbeReport
    from .sampler import Labeling

    return {
        cls.kind: cls
        for cls in (TaskStats, ProbeReport, Labeling, KernelMeta, ComparisonReport)
    }


def report_document(report):
    """The JSON-ready envelope for any report object."""
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": report.kind,
        "params": report.params(),
        "payload": report.payload(),
    }


def dumps_report(report):
    return json.dumps(report_document(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def save_report(report, path):
    """Write ``report`` as JSON. The file is replaced atomically."""
    _atomic_write(Path(path), dumps_report(report).encode("utf-8"))


def report_from_document(doc):
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise MalformedHeader(f"unsupported schema_version {doc.get('schema_version')!r}")
    kinds = _kinds()
    kind = doc.get("kind")
    if kind not in kinds:
        raise MalformedHeader(f"unknown report kind {kind!r}")
    return kinds[kind].from_document(doc["params"], doc["payload"])


def load_report(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return report_from_document(doc)


# --------------------------------------------------------------------------
# kernels

def save_kernel(kernel, path):
    """Write ``kernel.data`` as NPY plus a ``kernel_meta`` JSON sidecar.

    The sidecar lives next to the array at ``<path>.json``. Returns the
    sidecar path.
    """
    from .kernel import KernelMeta

    path = Path(path)
    write_npy(path, kernel.data)
    side = path.with_name(path.name + ".json")
    save_report(KernelMeta.from_kernel(kernel), side)
    return side


def load_kernel(path):
    from .kernel import KernelMatrix

    path = Path(path)
    data = read_npy(path)
    meta = load_report(path.with_name(path.name + ".json"))
    return KernelMatrix(
        data,
        centered=meta.centered,
        kind=meta.kernel_kind,
        model_id=meta.model_id,
        symmetrized=meta.symmetrized,
    )
