import gzip
import struct

import numpy as np
import pytest

from swiseg.volume import (
    BinaryMask,
    Volume,
    VolumeError,
    load_mask,
    load_volume,
    save_nifti,
    save_volume,
)


def test_volume_rejects_nan():
    arr = np.ones((2, 2, 2), dtype=np.float32)
    arr[0, 0, 0] = np.nan
    with pytest.raises(VolumeError):
        Volume(values=arr)


def test_volume_rejects_wrong_ndim():
    with pytest.raises(VolumeError):
        Volume(values=np.ones((4, 4), dtype=np.float32))


def test_raw_identity_load(tmp_path):
    vol = Volume(values=np.ones((4, 4, 4), dtype=np.float32))
    save_volume(vol, tmp_path / "v.json")
    loaded = load_volume(tmp_path / "v.json")
    assert loaded.dims == (4, 4, 4)
    assert np.all(loaded.values == 1.0)


def test_raw_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(7)
    vol = Volume(
        values=rng.normal(size=(9, 7, 5)).astype(np.float32),
        spacing=(2.0, 1.5, 3.0),
    )
    save_volume(vol, tmp_path / "v.json")
    loaded = load_volume(tmp_path / "v.json")
    assert loaded.dims == vol.dims
    assert loaded.spacing == vol.spacing
    assert np.array_equal(loaded.values, vol.values)


def test_raw_layout_is_x_fastest(tmp_path):
    vol = Volume(values=np.arange(24, dtype=np.float32).reshape((2, 3, 4), order="F"))
    save_volume(vol, tmp_path / "v.json")
    blob = (tmp_path / "v.raw").read_bytes()
    flat = np.frombuffer(blob, dtype="<f4")
    # linear index = x + nx*(y + ny*z)
    assert flat[0] == vol.values[0, 0, 0]
    assert flat[1] == vol.values[1, 0, 0]
    assert flat[2] == vol.values[0, 1, 0]


def test_nifti_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    vol = Volume(values=rng.random((6, 5, 4)).astype(np.float32), spacing=(1.0, 2.0, 4.0))
    save_nifti(vol, tmp_path / "v.nii")
    loaded = load_volume(tmp_path / "v.nii")
    assert loaded.dims == vol.dims
    assert loaded.spacing == vol.spacing
    assert np.allclose(loaded.values, vol.values)


def test_nifti_gzip_round_trip(tmp_path):
    vol = Volume(values=np.arange(8, dtype=np.float32).reshape((2, 2, 2)))
    save_nifti(vol, tmp_path / "v.nii.gz")
    with gzip.open(tmp_path / "v.nii.gz", "rb") as f:
        assert struct.unpack("<i", f.read(4))[0] == 348
    loaded = load_volume(tmp_path / "v.nii.gz")
    assert np.allclose(loaded.values, vol.values)


def _write_nifti_int16(path, arr, slope, inter):
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 3, *arr.shape, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, 4)  # int16
    struct.pack_into("<h", hdr, 72, 16)
    struct.pack_into("<8f", hdr, 76, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<f", hdr, 112, slope)
    struct.pack_into("<f", hdr, 116, inter)
    hdr[344:348] = b"n+1\x00"
    path.write_bytes(
        bytes(hdr) + b"\x00" * 4 + arr.astype("<i2").flatten(order="F").tobytes()
    )


def test_nifti_slope_intercept_applied(tmp_path):
    arr = np.full((2, 2, 2), 3, dtype=np.int16)
    _write_nifti_int16(tmp_path / "v.nii", arr, slope=2.0, inter=1.0)
    loaded = load_volume(tmp_path / "v.nii")
    assert np.all(loaded.values == 7.0)


def test_nifti_rejects_4d(tmp_path):
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 4, 2, 2, 2, 2, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, 16)
    hdr[344:348] = b"n+1\x00"
    (tmp_path / "v.nii").write_bytes(bytes(hdr) + b"\x00" * 100)
    with pytest.raises(VolumeError, match="3D"):
        load_volume(tmp_path / "v.nii")


def test_nifti_rejects_unsupported_datatype(tmp_path):
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 3, 2, 2, 2, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, 128)  # RGB, unsupported
    hdr[344:348] = b"n+1\x00"
    (tmp_path / "v.nii").write_bytes(bytes(hdr) + b"\x00" * 100)
    with pytest.raises(VolumeError, match="datatype"):
        load_volume(tmp_path / "v.nii")


def test_load_missing_file(tmp_path):
    with pytest.raises(VolumeError, match="no such file"):
        load_volume(tmp_path / "missing.nii")


def test_label_loads_as_mask(tmp_path):
    vol = Volume(values=np.array([0.0, 0.4, 0.6, 1.0], dtype=np.float32).reshape((4, 1, 1)))
    save_volume(vol, tmp_path / "lab.json")
    mask = load_mask(tmp_path / "lab.json")
    assert mask.values[:, 0, 0].tolist() == [False, False, True, True]
