"""Demonstration corpora: ingestion, validation, and per-demo annotations.

Records live in line-delimited JSON, one demonstration per line:

    {"id": str, "lab": str, "instructions": [str],
     "camera_extrinsics": {"pos": [x,y,z], "quat": [w,x,y,z]},
     "steps": [{"t": int, "ee_pos": [x,y,z], "ee_quat": [w,x,y,z],
                "gripper": float}, ...],
     "annotations": {...} | null}

Annotations derive the per-demo DV measurements: target object from the
instructions, object position from the first smoothed gripper close, object
color from a pluggable annotator, and the camera-pose bin.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np
import requests

from . import lexicon as lexmod
from .errors import (
    AnnotatorUnavailable,
    DegeneratePose,
    NoObjectFound,
    NoVerbFound,
    QuaternionNormError,
    SchemaError,
)
from .geometry import spherical_about

GRIPPER_WINDOW = 15
GRIPPER_THRESHOLD = 0.5
CAMERA_BIN_POLAR_WIDTH = 15.0
CAMERA_BIN_AZIMUTH_WIDTH = 30.0
QUAT_NORM_TOL = 1e-6

ANNOTATOR_URL_ENV = "DVC_ANNOTATOR_URL"
ANNOTATOR_TIMEOUT_ENV = "DVC_ANNOTATOR_TIMEOUT_MS"
ANNOTATOR_RETRIES_ENV = "DVC_ANNOTATOR_RETRIES"


@dataclass
class Steps:
    """Per-timestep trajectory arrays (structure-of-arrays layout)."""

    t: np.ndarray        # (n,) int64, strictly increasing
    ee_pos: np.ndarray   # (n, 3) float64, meters
    ee_quat: np.ndarray  # (n, 4) float64, unit (w, x, y, z)
    gripper: np.ndarray  # (n,) float64 in [0, 1], 1 = closed

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class Annotations:
    target_object: str | None = None
    object_position: tuple[float, float, float] | None = None
    object_color: str | None = None
    camera_bin: str | None = None


@dataclass
class DemoRecord:
    id: str
    lab: str
    instructions: tuple[str, ...]
    camera_pos: np.ndarray   # (3,)
    camera_quat: np.ndarray  # (4,) unit
    steps: Steps
    annotations: Annotations | None = None


# ---------------------------------------------------------------------------
# ingestion

def _schema(line: int, field: str, message: str) -> SchemaError:
    return SchemaError(line, field, message)


def parse_record(obj: dict, line: int = 0) -> DemoRecord:
    """Validate one decoded JSON object into a DemoRecord."""
    try:
        rid = obj["id"]
        lab = obj["lab"]
        instructions = obj["instructions"]
        cam = obj["camera_extrinsics"]
        steps = obj["steps"]
    except (KeyError, TypeError) as exc:
        raise _schema(line, str(exc), "missing required field") from None
    if not isinstance(rid, str) or not rid:
        raise _schema(line, "id", "must be a non-empty string")
    if not isinstance(lab, str):
        raise _schema(line, "lab", "must be a string")
    if not isinstance(instructions, list) or not all(isinstance(s, str) for s in instructions):
        raise _schema(line, "instructions", "must be a list of strings")
    try:
        cam_pos = np.asarray(cam["pos"], dtype=float)
        cam_quat = np.asarray(cam["quat"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise _schema(line, "camera_extrinsics", f"bad extrinsics: {exc}") from None
    if cam_pos.shape != (3,) or not np.isfinite(cam_pos).all():
        raise _schema(line, "camera_extrinsics.pos", "expected 3 finite numbers")
    if cam_quat.shape != (4,):
        raise _schema(line, "camera_extrinsics.quat", "expected 4 numbers")
    cam_norm = math.sqrt(float(cam_quat @ cam_quat))
    if abs(cam_norm - 1.0) > QUAT_NORM_TOL:
        raise QuaternionNormError(line, f"camera quaternion norm {cam_norm:.8f} != 1")
    if not isinstance(steps, list) or not steps:
        raise _schema(line, "steps", "must be a non-empty list")
    try:
        ts = np.array([s["t"] for s in steps], dtype=np.int64)
        ee_pos = np.array([s["ee_pos"] for s in steps], dtype=float)
        ee_quat = np.array([s["ee_quat"] for s in steps], dtype=float)
        gripper = np.array([s["gripper"] for s in steps], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise _schema(line, "steps", f"bad step fields: {exc}") from None
    n = len(steps)
    if ee_pos.shape != (n, 3) or not np.isfinite(ee_pos).all():
        raise _schema(line, "steps.ee_pos", "expected 3 finite numbers per step")
    if ee_quat.shape != (n, 4):
        raise _schema(line, "steps.ee_quat", "expected 4 numbers per step")
    norms = np.sqrt(np.einsum("ij,ij->i", ee_quat, ee_quat))
    if np.abs(norms - 1.0).max() > QUAT_NORM_TOL:
        bad = int(np.abs(norms - 1.0).argmax())
        raise QuaternionNormError(line, f"step {bad} quaternion norm {norms[bad]:.8f} != 1")
    if gripper.min() < 0.0 or gripper.max() > 1.0:
        raise _schema(line, "gripper", "gripper values must lie in [0, 1]")
    if n > 1 and np.diff(ts).min() <= 0:
        raise _schema(line, "steps.t", "timestamps must be strictly increasing")

    annotations = None
    ann = obj.get("annotations")
    if ann is not None:
        if not isinstance(ann, dict):
            raise _schema(line, "annotations", "must be an object or null")
        pos = ann.get("object_position")
        annotations = Annotations(
            target_object=ann.get("target_object"),
            object_position=tuple(float(v) for v in pos) if pos is not None else None,
            object_color=ann.get("object_color"),
            camera_bin=ann.get("camera_bin"),
        )
    return DemoRecord(
        id=rid,
        lab=lab,
        instructions=tuple(instructions),
        camera_pos=cam_pos,
        camera_quat=cam_quat,
        steps=Steps(ts, ee_pos, ee_quat, gripper),
        annotations=annotations,
    )


def iter_records(path):
    """Stream DemoRecords from a line-delimited file, validating each line."""
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise _schema(lineno, "json", f"invalid JSON: {exc.msg}") from None
            yield parse_record(obj, lineno)


def ingest(path) -> list[DemoRecord]:
    """Load and validate a whole corpus file; errors carry line numbers."""
    return list(iter_records(path))


def record_to_dict(record: DemoRecord) -> dict:
    ann = None
    if record.annotations is not None:
        a = record.annotations
        ann = {
            "target_object": a.target_object,
            "object_position": list(a.object_position) if a.object_position else None,
            "object_color": a.object_color,
            "camera_bin": a.camera_bin,
        }
    return {
        "id": record.id,
        "lab": record.lab,
        "instructions": list(record.instructions),
        "camera_extrinsics": {
            "pos": [float(v) for v in record.camera_pos],
            "quat": [float(v) for v in record.camera_quat],
        },
        "steps": [
            {
                "t": int(record.steps.t[i]),
                "ee_pos": [float(v) for v in record.steps.ee_pos[i]],
                "ee_quat": [float(v) for v in record.steps.ee_quat[i]],
                "gripper": float(record.steps.gripper[i]),
            }
            for i in range(len(record.steps))
        ],
        "annotations": ann,
    }


def write_records(path, records) -> int:
    """Write records as line-delimited JSON; returns the record count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


# ---------------------------------------------------------------------------
# gripper-signal annotations

def smooth_gripper(gripper: np.ndarray, window: int = GRIPPER_WINDOW) -> np.ndarray:
    """Centered moving average of width `window`, truncated at the edges."""
    g = np.asarray(gripper, dtype=float)
    n = len(g)
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(g)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1)
    return (csum[hi + 1] - csum[lo]) / (hi - lo + 1)


def first_close_index(gripper: np.ndarray, window: int = GRIPPER_WINDOW,
                      threshold: float = GRIPPER_THRESHOLD) -> int | None:
    """Index of the first up-crossing of the smoothed signal, if any."""
    s = smooth_gripper(gripper, window)
    above = s >= threshold
    crossings = np.flatnonzero(above[1:] & ~above[:-1])
    return int(crossings[0] + 1) if crossings.size else None


def first_release_index(gripper: np.ndarray, window: int = GRIPPER_WINDOW,
                        threshold: float = GRIPPER_THRESHOLD) -> int | None:
    """Index of the first down-crossing after the first close, if any."""
    close = first_close_index(gripper, window, threshold)
    if close is None:
        return None
    s = smooth_gripper(gripper, window)
    above = s >= threshold
    downs = np.flatnonzero(~above[1:] & above[:-1]) + 1
    downs = downs[downs > close]
    return int(downs[0]) if downs.size else None


def extract_object_position(steps: Steps, window: int = GRIPPER_WINDOW) -> tuple[float, float, float] | None:
    """End-effector position at the first smoothed gripper close, if any."""
    idx = first_close_index(steps.gripper, window)
    if idx is None:
        return None
    return tuple(float(v) for v in steps.ee_pos[idx])


def extract_release_position(steps: Steps, window: int = GRIPPER_WINDOW) -> tuple[float, float, float] | None:
    """End-effector position at the first release after a close, if any."""
    idx = first_release_index(steps.gripper, window)
    if idx is None:
        return None
    return tuple(float(v) for v in steps.ee_pos[idx])


# ---------------------------------------------------------------------------
# camera bins

@dataclass(frozen=True)
class CameraBin:
    label: str
    theta_center: float
    phi_center: float
    theta_width: float = CAMERA_BIN_POLAR_WIDTH
    phi_width: float = CAMERA_BIN_AZIMUTH_WIDTH


DEFAULT_CAMERA_BINS = (
    CameraBin("agent-front", 45.0, 0.0),
    CameraBin("agent-left", 45.0, 60.0),
    CameraBin("agent-right", 45.0, -60.0),
    CameraBin("shoulder-left", 45.0, 120.0),
    CameraBin("shoulder-right", 45.0, -120.0),
)
UNBINNED = "unbinned"


def _wrap_deg(delta: float) -> float:
    return (delta + 180.0) % 360.0 - 180.0


def bin_camera_pose(camera_pos, table_center=(0.0, 0.0, 0.0),
                    bins: tuple[CameraBin, ...] = DEFAULT_CAMERA_BINS) -> str:
    """Angular camera bin of a camera position about the table center.

    Bin membership is radius-independent: the polar angle must lie within
    theta_width/2 of the bin center and the azimuth within phi_width/2
    (wrap-aware), boundaries inclusive.  Returns `unbinned` when no bin fits.
    """
    try:
        _, theta, phi = spherical_about(camera_pos, table_center)
    except ValueError:
        raise DegeneratePose("camera position coincides with table center") from None
    for b in bins:
        if abs(theta - b.theta_center) <= b.theta_width / 2.0 and \
                abs(_wrap_deg(phi - b.phi_center)) <= b.phi_width / 2.0:
            return b.label
    return UNBINNED


def load_bin_table(path) -> tuple[CameraBin, ...]:
    """Read a camera-bin table from JSON: a list of
    {"label","theta_center","phi_center","theta_width","phi_width"}."""
    with open(path, encoding="utf-8") as fh:
        rows = json.load(fh)
    bins = []
    for row in rows:
        bins.append(
            CameraBin(
                label=row["label"],
                theta_center=float(row["theta_center"]),
                phi_center=float(row["phi_center"]),
                theta_width=float(row.get("theta_width", CAMERA_BIN_POLAR_WIDTH)),
                phi_width=float(row.get("phi_width", CAMERA_BIN_AZIMUTH_WIDTH)),
            )
        )
    return tuple(bins)


# ---------------------------------------------------------------------------
# color annotators

class OfflineColorTable:
    """Lookup-table annotator: record id -> color label."""

    def __init__(self, table: dict):
        self.table = dict(table)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def color_of(self, record: DemoRecord) -> str:
        label = self.table.get(record.id)
        if label is None:
            raise AnnotatorUnavailable(f"no color entry for record {record.id!r}")
        return label


class HttpColorAnnotator:
    """POSTs {"id", "image_ref", "object"} and expects {"color": str}.

    Configured by environment: DVC_ANNOTATOR_URL (required),
    DVC_ANNOTATOR_TIMEOUT_MS (default 5000), DVC_ANNOTATOR_RETRIES (default 1).
    """

    def __init__(self, url: str | None = None, timeout_ms: int | None = None,
                 retries: int | None = None, session=None):
        self.url = url if url is not None else os.environ.get(ANNOTATOR_URL_ENV)
        if not self.url:
            raise AnnotatorUnavailable(f"{ANNOTATOR_URL_ENV} is not set")
        if timeout_ms is None:
            timeout_ms = int(os.environ.get(ANNOTATOR_TIMEOUT_ENV, "5000"))
        if retries is None:
            retries = int(os.environ.get(ANNOTATOR_RETRIES_ENV, "1"))
        self.timeout = timeout_ms / 1000.0
        self.retries = max(retries, 1)
        self.session = session or requests.Session()

    def color_of(self, record: DemoRecord) -> str:
        payload = {
            "id": record.id,
            "image_ref": record.id,
            "object": (record.annotations.target_object
                       if record.annotations and record.annotations.target_object else ""),
        }
        last = None
        for _ in range(self.retries):
            try:
                resp = self.session.post(self.url, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
                if "color" not in body:
                    raise AnnotatorUnavailable("annotator response lacks 'color'")
                return str(body["color"])
            except (requests.RequestException, ValueError) as exc:
                last = exc
        raise AnnotatorUnavailable(f"annotator failed after {self.retries} tries: {last}")


def annotate_color(record: DemoRecord, annotator) -> str:
    """Canonical color of the record's object via the configured annotator."""
    return lexmod.canonical_color(annotator.color_of(record))


# ---------------------------------------------------------------------------
# annotation pipeline

def annotate_record(record: DemoRecord, annotator=None,
                    table_center=(0.0, 0.0, 0.0),
                    bins: tuple[CameraBin, ...] = DEFAULT_CAMERA_BINS,
                    lexicon=None, embeddings=None,
                    cut: float = lexmod.DEFAULT_CLUSTER_CUT) -> DemoRecord:
    """Return a copy of `record` with derived annotations filled in.

    Fields that cannot be derived (no verbs in instructions, no gripper close,
    no color annotator) are left None rather than failing the record.
    """
    target = None
    if record.instructions:
        try:
            target = lexmod.extract_target_object(record.instructions, lexicon, embeddings, cut)
        except (NoVerbFound, NoObjectFound):
            target = None
    position = extract_object_position(record.steps)
    camera_bin = bin_camera_pose(record.camera_pos, table_center, bins)
    ann = Annotations(
        target_object=target,
        object_position=position,
        object_color=None,
        camera_bin=camera_bin,
    )
    out = replace(record, annotations=ann)
    if annotator is not None:
        try:
            ann.object_color = annotate_color(out, annotator)
        except AnnotatorUnavailable:
            ann.object_color = None
    return out


def table_center_of(value) -> tuple[float, float, float]:
    """Parse an 'x,y,z' string or 3-sequence into a table-center tuple."""
    if isinstance(value, str):
        parts = [float(v) for v in value.split(",")]
    else:
        parts = [float(v) for v in value]
    if len(parts) != 3 or not all(math.isfinite(v) for v in parts):
        raise ValueError("table center needs exactly three finite numbers")
    return tuple(parts)
