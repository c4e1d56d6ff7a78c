"""Pluggable prediction backends.

The sliding-window engine talks to any object with a
``predict(PatchRequest) -> PatchResponse`` method.  Built-in synthetic
segmenters support verification without a trained model; external models
plug in over a line-delimited JSON subprocess protocol or HTTP.

Channel order is fixed: (image, tumor guidance, background guidance).
"""

from __future__ import annotations

import base64
import json
import subprocess
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .volume import BinaryMask, Dims, Volume, VolumeError

CHANNEL_IMAGE = 0
CHANNEL_TUMOR = 1
CHANNEL_BACKGROUND = 2
N_CHANNELS = 3


class SegmenterError(RuntimeError):
    """Raised when a prediction backend fails or violates its contract."""


class ProtocolError(SegmenterError):
    """Raised on wire-protocol violations (never silently coerced)."""


@dataclass(frozen=True)
class PatchRequest:
    """One window of stacked input channels.

    ``data`` has shape (channels, wx, wy, wz).  ``origin`` locates the
    window inside the full volume; it is engine-side metadata and is not
    part of the wire protocol.
    """

    id: str
    dims: Dims
    data: np.ndarray
    origin: Tuple[int, int, int] = (0, 0, 0)
    channels: int = N_CHANNELS

    def __post_init__(self):
        expected = (self.data.shape[0],) + tuple(self.dims)
        if self.data.shape != expected:
            raise VolumeError(f"request data shape {self.data.shape} != {expected}")
        if not np.all(np.isfinite(self.data)):
            raise VolumeError("request data contains non-finite values")
        object.__setattr__(self, "channels", int(self.data.shape[0]))


@dataclass(frozen=True)
class PatchResponse:
    id: str
    data: np.ndarray  # probability grid, shape == request dims

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise VolumeError("response probabilities outside [0, 1]")
        object.__setattr__(self, "data", arr)


class ThresholdSegmenter:
    """Hard-thresholds the image channel; ignores guidance."""

    def __init__(self, threshold: float = 0.5):
        self.threshold = threshold

    def predict(self, req: PatchRequest) -> PatchResponse:
        img = req.data[CHANNEL_IMAGE]
        return PatchResponse(id=req.id, data=(img >= self.threshold).astype(np.float32))


class OracleSegmenter:
    """Predicts the ground-truth label exactly, regardless of guidance."""

    def __init__(self, label: BinaryMask):
        self.label = label

    def predict(self, req: PatchRequest) -> PatchResponse:
        x, y, z = req.origin
        wx, wy, wz = req.dims
        patch = self.label.values[x : x + wx, y : y + wy, z : z + wz]
        return PatchResponse(id=req.id, data=patch.astype(np.float32))


class ClickResponsiveOracle:
    """Synthetic segmenter whose errors are fixed by valid corrective clicks.

    Starts from the label with a chosen set of connected components
    suppressed (false negatives) and spurious spherical blobs added (false
    positives).  A tumor-guidance voxel touching a suppressed component
    reveals the whole component; a background-guidance voxel touching a
    blob removes it.  Because guidance accumulates over the session, the
    prediction is a pure function of the current guidance channels and
    Dice is non-decreasing under valid corrective clicks.
    """

    def __init__(
        self,
        label: BinaryMask,
        suppressed_components: int = 0,
        fp_blobs: int = 0,
        seed: int = 0,
    ):
        if not label.values.any():
            raise VolumeError("ClickResponsiveOracle requires a non-empty label")
        self.label = label
        rng = np.random.default_rng(seed)

        structure = ndimage.generate_binary_structure(3, 1)
        labeled, n_comp = ndimage.label(label.values, structure=structure)
        comp_ids = np.arange(1, n_comp + 1)
        k = min(suppressed_components, n_comp)
        self.component_map = labeled
        self.suppressed_ids = tuple(
            sorted(rng.choice(comp_ids, size=k, replace=False).tolist())
        ) if k else ()

        self.blobs = self._make_blobs(label, fp_blobs, rng)
        self._effective: Optional[np.ndarray] = None

    @staticmethod
    def _make_blobs(label: BinaryMask, count: int, rng: np.random.Generator):
        blobs = []
        if count <= 0:
            return blobs
        dist_to_label = ndimage.distance_transform_edt(~label.values)
        dims = label.dims
        grid = np.indices(dims)
        taken = np.zeros(dims, dtype=bool)
        for _ in range(count):
            radius = int(rng.integers(2, 5))
            ok = dist_to_label > radius + 1
            for ax in range(3):  # keep the blob fully inside the grid
                ok &= (grid[ax] >= radius) & (grid[ax] < dims[ax] - radius)
            ok &= ~ndimage.binary_dilation(taken, iterations=2) if taken.any() else True
            coords = np.argwhere(ok)
            if len(coords) == 0:
                break
            center = coords[rng.integers(len(coords))]
            d2 = sum((grid[a] - center[a]) ** 2 for a in range(3))
            blob = d2 <= radius * radius
            blobs.append(blob)
            taken |= blob
        return blobs

    def begin(self, channels: Sequence[Volume]) -> None:
        """Recompute the effective predicted mask from full-volume guidance."""
        tumor = channels[CHANNEL_TUMOR].values > 0
        background = channels[CHANNEL_BACKGROUND].values > 0
        pred = self.label.values.copy()
        for cid in self.suppressed_ids:
            comp = self.component_map == cid
            if not (tumor & comp).any():
                pred &= ~comp
        for blob in self.blobs:
            if not (background & blob).any():
                pred |= blob
        self._effective = pred

    def predict(self, req: PatchRequest) -> PatchResponse:
        if self._effective is None:
            # direct per-patch use without the engine's begin() hook
            dims = self.label.dims
            wx, wy, wz = req.dims
            x, y, z = req.origin
            tumor = np.zeros(dims, dtype=np.float32)
            bg = np.zeros(dims, dtype=np.float32)
            tumor[x : x + wx, y : y + wy, z : z + wz] = req.data[CHANNEL_TUMOR]
            bg[x : x + wx, y : y + wy, z : z + wz] = req.data[CHANNEL_BACKGROUND]
            self.begin([
                Volume(values=np.zeros(dims, dtype=np.float32)),
                Volume(values=tumor),
                Volume(values=bg),
            ])
            patch = self._effective[x : x + wx, y : y + wy, z : z + wz]
            self._effective = None
            return PatchResponse(id=req.id, data=patch.astype(np.float32))
        x, y, z = req.origin
        wx, wy, wz = req.dims
        patch = self._effective[x : x + wx, y : y + wy, z : z + wz]
        return PatchResponse(id=req.id, data=patch.astype(np.float32))


def make_click_responsive_oracle(
    label: BinaryMask,
    suppressed_components: int = 0,
    fp_blobs: int = 0,
    seed: int = 0,
) -> ClickResponsiveOracle:
    return ClickResponsiveOracle(label, suppressed_components, fp_blobs, seed)


# ---------------------------------------------------------------------------
# Wire protocol: shared by the subprocess and HTTP transports.

WIRE_DTYPE = "f32le"


def request_to_wire(req: PatchRequest) -> dict:
    # channel-major, x-fastest within each channel
    parts = [req.data[c].astype("<f4").flatten(order="F") for c in range(req.channels)]
    blob = np.concatenate(parts).tobytes()
    return {
        "id": req.id,
        "dims": list(req.dims),
        "channels": req.channels,
        "dtype": WIRE_DTYPE,
        "data": base64.b64encode(blob).decode("ascii"),
    }


def response_from_wire(payload: dict, req: PatchRequest) -> PatchResponse:
    for key in ("id", "dims", "channels", "dtype", "data"):
        if key not in payload:
            raise ProtocolError(f"request {req.id}: response missing field {key!r}")
    if payload["id"] != req.id:
        raise ProtocolError(
            f"request {req.id}: response id mismatch ({payload['id']!r})"
        )
    if payload["dtype"] != WIRE_DTYPE:
        raise ProtocolError(f"request {req.id}: unsupported dtype {payload['dtype']!r}")
    if payload["channels"] != 1:
        raise ProtocolError(
            f"request {req.id}: expected 1 response channel, got {payload['channels']}"
        )
    dims = tuple(int(d) for d in payload["dims"])
    if dims != tuple(req.dims):
        raise ProtocolError(
            f"request {req.id}: response dims {dims} != request dims {tuple(req.dims)}"
        )
    try:
        blob = base64.b64decode(payload["data"])
    except Exception as e:
        raise ProtocolError(f"request {req.id}: undecodable data: {e}") from e
    n = dims[0] * dims[1] * dims[2]
    if len(blob) != 4 * n:
        raise ProtocolError(
            f"request {req.id}: data has {len(blob)} bytes, expected {4 * n}"
        )
    arr = np.frombuffer(blob, dtype="<f4").reshape(dims, order="F")
    return PatchResponse(id=req.id, data=arr)


class SubprocessSegmenter:
    """Forwards requests to a child process speaking line-delimited JSON."""

    def __init__(self, command: Sequence[str], timeout: float = 60.0):
        self.command = list(command)
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None

    def _ensure_started(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )

    def predict(self, req: PatchRequest) -> PatchResponse:
        self._ensure_started()
        line = json.dumps(request_to_wire(req))
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
            out = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as e:
            raise SegmenterError(f"request {req.id}: backend process died: {e}") from e
        if not out:
            raise SegmenterError(f"request {req.id}: backend closed its output stream")
        try:
            payload = json.loads(out)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"request {req.id}: malformed response line: {e}") from e
        return response_from_wire(payload, req)

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None


class HttpSegmenter:
    """Forwards requests to an HTTP endpoint exposing POST /predict."""

    def __init__(self, base_url: str, timeout: float = 60.0):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout)

    def predict(self, req: PatchRequest) -> PatchResponse:
        import httpx

        try:
            r = self._client.post(
                f"{self.base_url}/predict", json=request_to_wire(req)
            )
            r.raise_for_status()
            payload = r.json()
        except httpx.HTTPError as e:
            raise SegmenterError(f"request {req.id}: HTTP backend error: {e}") from e
        except json.JSONDecodeError as e:
            raise ProtocolError(f"request {req.id}: malformed response body: {e}") from e
        return response_from_wire(payload, req)

    def close(self):
        self._client.close()


def external_segmenter(endpoint: str, timeout: float = 60.0):
    """Build a segmenter from an endpoint spec.

    ``http://...`` selects the HTTP transport; anything else is treated as
    a shell-split child process command.
    """
    if endpoint.startswith("http://") or endpoint.startswith("https://"):
        return HttpSegmenter(endpoint, timeout=timeout)
    import shlex

    return SubprocessSegmenter(shlex.split(endpoint), timeout=timeout)
