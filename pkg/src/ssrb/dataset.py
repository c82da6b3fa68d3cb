"""Labeled trace datasets and the SSRD binary file format.

SSRD layout (all little-endian):

    magic  4 bytes  b"SSRD"
    u8              format version (1)
    u32             n      samples per trace
    u32             count  number of traces
    f64             dt     sample interval
    f32[count*n]    samples, row-major
    u8[count]       labels (UP=1, DOWN=0)
    u32             metadata length
    bytes           UTF-8 JSON metadata blob
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FileFormatError, LengthMismatchError, VersionMismatchError
from .traces import Provenance, TraceGrid

MAGIC = b"SSRD"
VERSION = 1
_HEADER = struct.Struct("<IId")


@dataclass
class LabeledDataset:
    """Traces plus labels plus how the labels were obtained.

    ``samples`` is (count, n) float32, ``labels`` is (count,) uint8 with the
    UP=1 / DOWN=0 convention.  ``meta`` records generation parameters (rates,
    noise, SNR values, seed) for provenance.
    """

    samples: np.ndarray
    labels: np.ndarray
    grid: TraceGrid
    provenance: Provenance = Provenance.TRUE_LABELS
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a 2-D (count, n) array")
        if self.samples.shape[1] != self.grid.n:
            raise LengthMismatchError(
                f"trace length {self.samples.shape[1]} != grid n {self.grid.n}"
            )
        if self.labels.shape != (self.samples.shape[0],):
            raise LengthMismatchError(
                f"{self.labels.shape[0]} labels for {self.samples.shape[0]} traces"
            )
        if self.labels.size and self.labels.max() > 1:
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    def with_labels(self, labels: np.ndarray, provenance: Provenance) -> "LabeledDataset":
        """Same traces, new labels (e.g. relabeled by a classifier)."""
        meta = dict(self.meta)
        meta["relabeled_from"] = self.provenance.value
        return LabeledDataset(self.samples, labels, self.grid, provenance, meta)

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            self.samples[idx], self.labels[idx], self.grid, self.provenance, dict(self.meta)
        )


def save_dataset(ds: LabeledDataset, path) -> None:
    meta = dict(ds.meta)
    meta["provenance"] = ds.provenance.value
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(_HEADER.pack(ds.grid.n, ds.count, ds.grid.dt))
        fh.write(np.ascontiguousarray(ds.samples, dtype="<f4").tobytes())
        fh.write(ds.labels.tobytes())
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def load_dataset(path) -> LabeledDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 5 or raw[:4] != MAGIC:
        raise FileFormatError(f"{path}: not an SSRD dataset file")
    if raw[4] != VERSION:
        raise VersionMismatchError(
            f"{path}: SSRD version {raw[4]} unsupported (expected {VERSION})"
        )
    off = 5
    n, count, dt = _HEADER.unpack_from(raw, off)
    off += _HEADER.size
    nbytes = count * n * 4
    if len(raw) < off + nbytes + count + 4:
        raise FileFormatError(f"{path}: truncated SSRD file")
    samples = np.frombuffer(raw, dtype="<f4", count=count * n, offset=off).reshape(count, n)
    off += nbytes
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=off)
    off += count
    (blob_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    if len(raw) < off + blob_len:
        raise FileFormatError(f"{path}: truncated metadata blob")
    meta = json.loads(raw[off : off + blob_len].decode("utf-8"))
    provenance = Provenance(meta.pop("provenance", Provenance.TRUE_LABELS.value))
    return LabeledDataset(
        samples.copy(), labels.copy(), TraceGrid(dt=dt, n=n), provenance, meta
    )
