"""Core volumetric types and file I/O.

A :class:`Volume` is a dense 3D scalar grid with voxel spacing in
millimeters.  Arrays are stored with shape ``(nx, ny, nz)``; the linear
(on-disk) layout is x-fastest, i.e. Fortran order for that shape.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

Dims = Tuple[int, int, int]
Spacing = Tuple[float, float, float]


class VolumeError(ValueError):
    """Raised for malformed volumes or unreadable volume files."""


@dataclass(frozen=True)
class Volume:
    """A 3D scalar grid plus spacing metadata."""

    values: np.ndarray
    spacing: Spacing = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 3:
            raise VolumeError(f"volume must be 3D, got ndim={arr.ndim}")
        if arr.size == 0:
            raise VolumeError("volume must contain at least one voxel")
        if not np.all(np.isfinite(arr)):
            raise VolumeError("volume contains non-finite values")
        if any(s <= 0 for s in self.spacing):
            raise VolumeError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> Dims:
        return tuple(int(d) for d in self.values.shape)

    def with_values(self, values: np.ndarray) -> "Volume":
        return Volume(values=values, spacing=self.spacing)


@dataclass(frozen=True)
class BinaryMask:
    """A per-voxel boolean mask paired with a volume of identical dims."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values).astype(bool)
        if arr.ndim != 3:
            raise VolumeError(f"mask must be 3D, got ndim={arr.ndim}")
        if arr.size == 0:
            raise VolumeError("mask must contain at least one voxel")
        object.__setattr__(self, "values", arr)

    @property
    def dims(self) -> Dims:
        return tuple(int(d) for d in self.values.shape)

    def count(self) -> int:
        return int(self.values.sum())


def check_same_dims(a, b, what: str = "inputs") -> None:
    if a.dims != b.dims:
        raise VolumeError(f"{what} dims differ: {a.dims} vs {b.dims}")


# ---------------------------------------------------------------------------
# Raw internal format: <name>.json header + little-endian float32 blob.

_RAW_DTYPE = "f32"


def save_volume(vol: Volume, path) -> None:
    """Write a volume in the internal raw format.

    ``path`` is the JSON header path; the blob is written next to it with a
    ``.raw`` suffix and referenced from the header.
    """
    path = Path(path)
    blob_name = path.with_suffix(".raw").name
    header = {
        "dims": list(vol.dims),
        "spacing": list(vol.spacing),
        "dtype": _RAW_DTYPE,
        "blob": blob_name,
    }
    path.write_text(json.dumps(header))
    blob = vol.values.astype("<f4").flatten(order="F").tobytes()
    (path.parent / blob_name).write_bytes(blob)


def _load_raw(path: Path) -> Volume:
    try:
        header = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise VolumeError(f"unreadable raw header {path}: {e}") from e
    for key in ("dims", "dtype"):
        if key not in header:
            raise VolumeError(f"raw header {path} missing field {key!r}")
    if header["dtype"] != _RAW_DTYPE:
        raise VolumeError(f"unsupported raw dtype {header['dtype']!r}")
    dims = tuple(int(d) for d in header["dims"])
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise VolumeError(f"bad dims in raw header: {dims}")
    spacing = tuple(float(s) for s in header.get("spacing", (1.0, 1.0, 1.0)))
    blob_path = path.parent / header.get("blob", path.with_suffix(".raw").name)
    blob = blob_path.read_bytes()
    expected = dims[0] * dims[1] * dims[2] * 4
    if len(blob) != expected:
        raise VolumeError(
            f"raw blob {blob_path} has {len(blob)} bytes, expected {expected}"
        )
    arr = np.frombuffer(blob, dtype="<f4").reshape(dims, order="F")
    return Volume(values=arr, spacing=spacing)


# ---------------------------------------------------------------------------
# Minimal NIfTI-1 subset: 3D, uint8/int16/float32/float64, scl_slope/inter,
# optional gzip.

_NIFTI_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32, 64: np.float64}
_NIFTI_CODES = {np.dtype(np.float32): 16}
_HDR_SIZE = 348


def _open_maybe_gz(path: Path, mode: str):
    if path.suffix == ".gz":
        return gzip.open(path, mode)
    return open(path, mode)


def _load_nifti(path: Path) -> Volume:
    with _open_maybe_gz(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HDR_SIZE:
        raise VolumeError(f"{path}: truncated NIfTI header")
    sizeof_hdr = struct.unpack_from("<i", raw, 0)[0]
    if sizeof_hdr != _HDR_SIZE:
        raise VolumeError(f"{path}: not a NIfTI-1 file (sizeof_hdr={sizeof_hdr})")
    magic = raw[344:348]
    if magic[:3] not in (b"n+1", b"ni1"):
        raise VolumeError(f"{path}: bad NIfTI magic {magic!r}")
    dim = struct.unpack_from("<8h", raw, 40)
    if dim[0] != 3:
        raise VolumeError(f"{path}: expected 3D volume, got dim[0]={dim[0]}")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if nx < 1 or ny < 1 or nz < 1:
        raise VolumeError(f"{path}: non-positive dims {(nx, ny, nz)}")
    datatype = struct.unpack_from("<h", raw, 70)[0]
    if datatype not in _NIFTI_DTYPES:
        raise VolumeError(f"{path}: unsupported NIfTI datatype {datatype}")
    pixdim = struct.unpack_from("<8f", raw, 76)
    spacing = tuple(abs(p) if p != 0 else 1.0 for p in pixdim[1:4])
    vox_offset = struct.unpack_from("<f", raw, 108)[0]
    scl_slope = struct.unpack_from("<f", raw, 112)[0]
    scl_inter = struct.unpack_from("<f", raw, 116)[0]
    dtype = np.dtype(_NIFTI_DTYPES[datatype]).newbyteorder("<")
    offset = int(vox_offset) if vox_offset else _HDR_SIZE
    n = nx * ny * nz
    data = raw[offset : offset + n * dtype.itemsize]
    if len(data) < n * dtype.itemsize:
        raise VolumeError(f"{path}: truncated NIfTI data section")
    arr = np.frombuffer(data, dtype=dtype).reshape((nx, ny, nz), order="F")
    arr = arr.astype(np.float32)
    if scl_slope not in (0.0,):  # slope 0 means "not set" per the standard
        arr = arr * scl_slope + scl_inter
    return Volume(values=arr, spacing=spacing)


def save_nifti(vol: Volume, path) -> None:
    """Write a float32 NIfTI-1 file (gzipped when the path ends in .gz)."""
    path = Path(path)
    hdr = bytearray(_HDR_SIZE)
    struct.pack_into("<i", hdr, 0, _HDR_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, *vol.dims, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, 16)  # float32
    struct.pack_into("<h", hdr, 72, 32)  # bitpix
    struct.pack_into("<8f", hdr, 76, 1.0, *vol.spacing, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", hdr, 108, 352.0)  # vox_offset
    struct.pack_into("<f", hdr, 112, 1.0)  # scl_slope
    struct.pack_into("<f", hdr, 116, 0.0)  # scl_inter
    hdr[344:348] = b"n+1\x00"
    payload = bytes(hdr) + b"\x00" * 4 + vol.values.astype("<f4").flatten(order="F").tobytes()
    with _open_maybe_gz(path, "wb") as f:
        f.write(payload)


# ---------------------------------------------------------------------------


def load_volume(path) -> Volume:
    """Load a volume from the internal raw format or a NIfTI-1 file."""
    path = Path(path)
    if not path.exists():
        raise VolumeError(f"no such file: {path}")
    if path.suffix == ".json":
        return _load_raw(path)
    return _load_nifti(path)


def load_mask(path) -> BinaryMask:
    """Load a label file as a binary mask (foreground where value > 0.5)."""
    vol = load_volume(path)
    return BinaryMask(values=vol.values > 0.5)


def load_pair(image_path, label_path=None) -> Tuple[Volume, Optional[BinaryMask]]:
    vol = load_volume(image_path)
    mask = None
    if label_path is not None:
        mask = load_mask(label_path)
        check_same_dims(vol, mask, "image/label")
    return vol, mask
