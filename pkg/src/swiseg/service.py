"""Session-oriented HTTP API for human-in-the-loop annotation.

Each session holds one volume, an optional ground-truth label (enabling
live Dice/NSD feedback), the accumulated clicks, and the latest
prediction.  Sessions persist to one directory each and survive restarts.
"""

from __future__ import annotations

import base64
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import metrics, preprocess
from .guidance import CLASSES, Click, ClickSet, encode_clicks
from .segmenters import SegmenterError
from .simulator import build_segmenter
from .strategy import binarize, select_worst_patches
from .volume import BinaryMask, Volume, VolumeError, load_mask, load_volume, save_volume
from .windowing import WindowConfig, plan_windows, sw_predict

DEFAULT_SIZE_CAP_VOXELS = 512 * 512 * 512

_AXES = {"x": 0, "y": 1, "z": 2}


class CreateSession(BaseModel):
    path: Optional[str] = None
    label_path: Optional[str] = None
    dims: Optional[List[int]] = None
    spacing: Optional[List[float]] = None
    data_b64: Optional[str] = None
    label_b64: Optional[str] = None


class ClickBody(BaseModel):
    pos: List[int]
    cls: str


@dataclass
class Session:
    id: str
    volume: Volume
    label: Optional[BinaryMask]
    clicks: ClickSet = field(default_factory=ClickSet)
    prediction: Optional[Volume] = None
    predict_count: int = 0
    dice_history: List[float] = field(default_factory=list)
    nsd_history: List[float] = field(default_factory=list)
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def iteration(self) -> int:
        return max(0, self.predict_count - 1)

    def meta(self) -> dict:
        return {
            "id": self.id,
            "dims": list(self.volume.dims),
            "spacing": list(self.volume.spacing),
            "has_label": self.label is not None,
            "clicks": self.clicks.to_json(),
            "iteration": self.iteration,
            "predict_count": self.predict_count,
            "dice_history": self.dice_history,
            "nsd_history": self.nsd_history,
            "created": self.created,
            "updated": self.updated,
        }


def _b64_plane(plane: np.ndarray) -> str:
    return base64.b64encode(plane.astype("<f4").flatten(order="F").tobytes()).decode("ascii")


class SessionStore:
    """Disk-backed session registry: one directory per session holding the
    raw volume blob plus a JSON state file."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.sessions: Dict[str, Session] = {}
        self._load_all()

    def _dir(self, sid: str) -> Path:
        return self.root / sid

    def _load_all(self):
        for d in sorted(self.root.iterdir()):
            state_file = d / "state.json"
            if not d.is_dir() or not state_file.exists():
                continue
            try:
                state = json.loads(state_file.read_text())
                volume = load_volume(d / "volume.json")
                label = None
                if (d / "label.json").exists():
                    label = load_mask(d / "label.json")
                prediction = None
                if (d / "prediction.json").exists():
                    prediction = load_volume(d / "prediction.json")
                self.sessions[state["id"]] = Session(
                    id=state["id"],
                    volume=volume,
                    label=label,
                    clicks=ClickSet.from_json(state["clicks"]),
                    prediction=prediction,
                    predict_count=state["predict_count"],
                    dice_history=state["dice_history"],
                    nsd_history=state["nsd_history"],
                    created=state["created"],
                    updated=state["updated"],
                )
            except (VolumeError, KeyError, json.JSONDecodeError, OSError):
                continue

    def persist(self, s: Session, volume_changed: bool = False):
        d = self._dir(s.id)
        d.mkdir(parents=True, exist_ok=True)
        if volume_changed:
            save_volume(s.volume, d / "volume.json")
            if s.label is not None:
                save_volume(
                    Volume(values=s.label.values.astype(np.float32), spacing=s.volume.spacing),
                    d / "label.json",
                )
        if s.prediction is not None:
            save_volume(s.prediction, d / "prediction.json")
        state = s.meta()
        (d / "state.json").write_text(json.dumps(state))

    def delete(self, sid: str):
        import shutil

        self.sessions.pop(sid, None)
        if self._dir(sid).exists():
            shutil.rmtree(self._dir(sid))


def create_app(
    storage_dir,
    segmenter_spec: str = "oracle",
    window: WindowConfig = WindowConfig(),
    size_cap_voxels: int = DEFAULT_SIZE_CAP_VOXELS,
    seed: int = 0,
) -> FastAPI:
    app = FastAPI(title="swiseg annotation service")
    store = SessionStore(Path(storage_dir))
    app.state.store = store

    def get_session(sid: str) -> Session:
        s = store.sessions.get(sid)
        if s is None:
            raise HTTPException(status_code=404, detail=f"unknown session {sid}")
        return s

    def load_from_body(body: CreateSession):
        if body.path:
            volume = load_volume(body.path)
            label = load_mask(body.label_path) if body.label_path else None
            return volume, label
        if body.dims and body.data_b64:
            dims = tuple(body.dims)
            spacing = tuple(body.spacing) if body.spacing else (1.0, 1.0, 1.0)
            blob = base64.b64decode(body.data_b64)
            n = dims[0] * dims[1] * dims[2]
            if len(blob) != 4 * n:
                raise VolumeError(
                    f"volume blob has {len(blob)} bytes, expected {4 * n}"
                )
            arr = np.frombuffer(blob, dtype="<f4").reshape(dims, order="F")
            volume = Volume(values=arr, spacing=spacing)
            label = None
            if body.label_b64:
                lblob = base64.b64decode(body.label_b64)
                if len(lblob) != 4 * n:
                    raise VolumeError("label blob size mismatch")
                label = BinaryMask(
                    values=np.frombuffer(lblob, dtype="<f4").reshape(dims, order="F") > 0.5
                )
            return volume, label
        raise VolumeError("provide either 'path' or 'dims'+'data_b64'")

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        try:
            volume, label = load_from_body(body)
        except VolumeError as e:
            raise HTTPException(status_code=400, detail=str(e))
        if volume.values.size > size_cap_voxels:
            raise HTTPException(
                status_code=413,
                detail=f"volume has {volume.values.size} voxels, cap is {size_cap_voxels}",
            )
        volume = preprocess.percentile_normalize(volume)
        sid = uuid.uuid4().hex[:12]
        s = Session(id=sid, volume=volume, label=label)
        store.sessions[sid] = s
        store.persist(s, volume_changed=True)
        return {"id": sid, "dims": list(volume.dims)}

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [s.meta() for s in store.sessions.values()]}

    @app.get("/sessions/{sid}")
    def get_session_meta(sid: str):
        return get_session(sid).meta()

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        get_session(sid)
        store.delete(sid)
        return {"deleted": sid}

    @app.post("/sessions/{sid}/clicks")
    def add_click(sid: str, body: ClickBody):
        s = get_session(sid)
        if body.cls not in CLASSES:
            raise HTTPException(status_code=422, detail=f"cls must be one of {CLASSES}")
        if len(body.pos) != 3 or any(
            not 0 <= p < d for p, d in zip(body.pos, s.volume.dims)
        ):
            raise HTTPException(
                status_code=422,
                detail=f"position {body.pos} out of bounds for dims {s.volume.dims}",
            )
        with s.lock:
            s.clicks.add(Click(pos=tuple(body.pos), cls=body.cls, iteration=s.predict_count))
            s.updated = time.time()
            store.persist(s)
        return {"clicks": len(s.clicks)}

    @app.delete("/sessions/{sid}/clicks/last")
    def delete_last_click(sid: str):
        s = get_session(sid)
        with s.lock:
            if not s.clicks.clicks:
                raise HTTPException(status_code=422, detail="no clicks to delete")
            removed = s.clicks.clicks.pop()
            s.updated = time.time()
            store.persist(s)
        return {"removed": removed.to_json(), "clicks": len(s.clicks)}

    @app.post("/sessions/{sid}/predict")
    def predict(sid: str):
        s = get_session(sid)
        with s.lock:
            channels = encode_clicks(s.clicks, s.volume.dims, s.volume.spacing)
            segmenter = build_segmenter(segmenter_spec, label=s.label, seed=seed)
            try:
                prediction = sw_predict(
                    [s.volume, channels.tumor, channels.background], segmenter, window
                )
            except (SegmenterError, ValueError) as e:
                raise HTTPException(status_code=503, detail=str(e))
            s.prediction = prediction
            s.predict_count += 1
            out = {"iteration": s.iteration}
            if s.label is not None:
                pred = binarize(prediction)
                d = metrics.dice(pred, s.label)
                n = metrics.nsd(pred, s.label, spacing=s.volume.spacing)
                s.dice_history.append(d)
                s.nsd_history.append(n)
                out.update({"dice": d, "nsd": n})
            s.updated = time.time()
            store.persist(s)
        return out

    @app.get("/sessions/{sid}/slice")
    def get_slice(sid: str, axis: str = "z", index: int = 0):
        s = get_session(sid)
        if axis not in _AXES:
            raise HTTPException(status_code=422, detail=f"axis must be one of {list(_AXES)}")
        ax = _AXES[axis]
        extent = s.volume.dims[ax]
        if not 0 <= index < extent:
            raise HTTPException(
                status_code=422, detail=f"index {index} out of range [0, {extent})"
            )
        sl = [slice(None)] * 3
        sl[ax] = index
        sl = tuple(sl)
        plane = s.volume.values[sl]
        out = {
            "axis": axis,
            "index": index,
            "extent": extent,
            "plane_dims": list(plane.shape),
            "image_b64": _b64_plane(plane),
            "prediction_b64": None,
            "clicks": [
                c.to_json() for c in s.clicks if c.pos[ax] == index
            ],
            "worst_patch": None,
        }
        if s.prediction is not None:
            out["prediction_b64"] = _b64_plane(
                (s.prediction.values[sl] >= 0.5).astype(np.float32)
            )
        if s.label is not None and s.prediction is not None:
            grid = plan_windows(s.volume.dims, window)
            t_idx, _ = select_worst_patches(binarize(s.prediction), s.label, grid)
            if t_idx is not None:
                origin = grid.origins[t_idx]
                wdims = grid.window_dims
                if origin[ax] <= index < origin[ax] + wdims[ax]:
                    in_plane = [a for a in range(3) if a != ax]
                    out["worst_patch"] = {
                        "origin": [int(origin[a]) for a in in_plane],
                        "size": [int(wdims[a]) for a in in_plane],
                    }
        return out

    return app
