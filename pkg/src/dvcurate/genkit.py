"""Procedural generation: textures, task-instance enumeration, synthesis.

Fractal textures are value noise (4 octaves, persistence 0.5, frequency
doubling) normalized to [0, 1] and affinely mapped into a TextureSpec's HSV
bounds, hue wrap-aware.  Lab enumeration expands the benchmark task templates
per lab and crosses them with camera bins and spatial combinations.  Synthesis
re-anchors object-centric trajectory segments with rigid transforms and
bridges the junctions by linear/spherical interpolation.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateAnchor, SegmentationMismatch
from .geometry import (
    is_unit_quat,
    pose_compose,
    pose_inverse,
    quat_mul,
    quat_rotate_many,
    quat_slerp,
)
from .metadata import GRIPPER_WINDOW, GRIPPER_THRESHOLD, DemoRecord, Steps, smooth_gripper
from .rng import substream
from .taskspec import PredicateSequence, TextureSpec

NOISE_OCTAVES = 4
NOISE_PERSISTENCE = 0.5
NOISE_BASE_CELLS = 4

RASTER_MAGIC = b"DVTX"


# ---------------------------------------------------------------------------
# fractal textures

@dataclass
class TextureRaster:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) HSV float64


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _value_noise(gen, width: int, height: int, octaves: int, persistence: float) -> np.ndarray:
    """Summed bilinear value noise normalized to [0, 1]."""
    ys, xs = np.mgrid[0:height, 0:width].astype(float)
    u_base = xs / width
    v_base = ys / height
    total = np.zeros((height, width))
    amp = 1.0
    freq = float(NOISE_BASE_CELLS)
    for _ in range(octaves):
        lattice = gen.random((int(freq) + 2, int(freq) + 2))
        u = u_base * freq
        v = v_base * freq
        i0 = np.floor(u).astype(int)
        j0 = np.floor(v).astype(int)
        fu = _fade(u - i0)
        fv = _fade(v - j0)
        n00 = lattice[j0, i0]
        n01 = lattice[j0, i0 + 1]
        n10 = lattice[j0 + 1, i0]
        n11 = lattice[j0 + 1, i0 + 1]
        total += amp * ((n00 * (1 - fu) + n01 * fu) * (1 - fv) + (n10 * (1 - fu) + n11 * fu) * fv)
        amp *= persistence
        freq *= 2.0
    lo = total.min()
    span = total.max() - lo
    if span == 0.0:
        return np.full((height, width), 0.5)
    return (total - lo) / span


_H_CHANNEL, _S_CHANNEL, _V_CHANNEL = range(3)


def fractal_texture(spec: TextureSpec, width: int, height: int, seed: int,
                    octaves: int = NOISE_OCTAVES,
                    persistence: float = NOISE_PERSISTENCE) -> TextureRaster:
    """Render a fractal-noise HSV raster inside `spec`'s bounds.

    Each channel gets its own noise field from an independent substream of
    `seed`; hue is mapped through the wrap-aware window so h_min > h_max
    produces hues in [h_min, 1) or [0, h_max].
    """
    if spec.mode != "fractal":
        raise ValueError(f"fractal_texture needs a fractal TextureSpec, got {spec.mode!r}")
    if width < 1 or height < 1:
        raise ValueError("raster dimensions must be >= 1")
    h_noise = _value_noise(substream(seed, _H_CHANNEL), width, height, octaves, persistence)
    s_noise = _value_noise(substream(seed, _S_CHANNEL), width, height, octaves, persistence)
    v_noise = _value_noise(substream(seed, _V_CHANNEL), width, height, octaves, persistence)
    h = spec.hue_from_unit(h_noise)
    s = np.clip(spec.s_min + s_noise * (spec.s_max - spec.s_min), spec.s_min, spec.s_max)
    v = np.clip(spec.v_min + v_noise * (spec.v_max - spec.v_min), spec.v_min, spec.v_max)
    return TextureRaster(width, height, np.stack([h, s, v], axis=-1))


def raster_within(spec: TextureSpec, raster: TextureRaster) -> bool:
    """True iff every pixel lies inside the spec bounds (hue wrap-aware)."""
    h = raster.pixels[..., 0]
    s = raster.pixels[..., 1]
    v = raster.pixels[..., 2]
    if spec.mode == "fractal" and spec.h_min > spec.h_max:
        h_ok = (h >= spec.h_min) | (h <= spec.h_max)
    else:
        h_ok = (h >= spec.h_min) & (h <= spec.h_max)
    return bool(
        h_ok.all()
        and ((s >= spec.s_min) & (s <= spec.s_max)).all()
        and ((v >= spec.v_min) & (v <= spec.v_max)).all()
    )


def write_raster(path, raster: TextureRaster) -> None:
    """Binary raster: magic, uint32 width/height, float32 HSV per pixel."""
    with open(path, "wb") as fh:
        fh.write(RASTER_MAGIC)
        fh.write(struct.pack("<II", raster.width, raster.height))
        fh.write(raster.pixels.astype("<f4").tobytes())


def read_raster(path) -> TextureRaster:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != RASTER_MAGIC:
            raise ValueError(f"not a texture raster (magic {magic!r})")
        width, height = struct.unpack("<II", fh.read(8))
        raw = fh.read()
    expected = width * height * 3 * 4
    if len(raw) < expected:
        raise ValueError("truncated raster payload")
    if len(raw) > expected:
        raise ValueError("oversized raster payload")
    data = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return TextureRaster(width, height, data.reshape(height, width, 3))


def _hsv_to_rgb(pixels: np.ndarray) -> np.ndarray:
    h = pixels[..., 0] % 1.0
    s = pixels[..., 1]
    v = pixels[..., 2]
    k = h * 6.0
    i = np.floor(k).astype(int) % 6
    f = k - np.floor(k)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    r = np.select([i == 0, i == 1, i == 2, i == 3, i == 4, i == 5], [v, q, p, p, t, v])
    g = np.select([i == 0, i == 1, i == 2, i == 3, i == 4, i == 5], [t, v, v, q, p, p])
    b = np.select([i == 0, i == 1, i == 2, i == 3, i == 4, i == 5], [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def write_ppm(path, raster: TextureRaster) -> None:
    """Portable pixmap export (P6, 8-bit) for eyeballing textures."""
    rgb = np.clip(_hsv_to_rgb(raster.pixels) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{raster.width} {raster.height}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


# ---------------------------------------------------------------------------
# lab enumeration

DEFAULT_CAMERA_BIN_LABELS = (
    "agent-front",
    "agent-left",
    "agent-right",
    "shoulder-left",
    "shoulder-right",
)
DEFAULT_SPATIAL_COMBINATIONS = 90
DEFAULT_LAB_COUNT = 8

_OBJECT_POOL = (
    "carrot",
    "bowl",
    "teapot",
    "marker",
    "cup",
    "banana",
    "mug",
    "plate",
    "apple",
    "bottle",
    "spoon",
    "brush",
    "block",
    "towel",
)


@dataclass(frozen=True)
class LabConfig:
    lab: str
    objects: tuple
    receptacles: tuple
    has_drawer: bool = True
    has_microwave: bool = True
    has_stove: bool = True
    has_coffee_machine: bool = False
    camera_bins: tuple = DEFAULT_CAMERA_BIN_LABELS
    spatial_combinations: int = DEFAULT_SPATIAL_COMBINATIONS

    def __post_init__(self):
        if len(self.objects) != 7:
            raise ConfigError(f"{self.lab}: object roster must have 7 entries, got {len(self.objects)}")
        if len(set(self.objects)) != len(self.objects):
            raise ConfigError(f"{self.lab}: duplicate objects in roster")
        if not self.receptacles:
            raise ConfigError(f"{self.lab}: receptacle roster must be non-empty")
        if len(self.camera_bins) != 5:
            raise ConfigError(f"{self.lab}: camera bins must have 5 entries, got {len(self.camera_bins)}")
        if self.spatial_combinations < 1:
            raise ConfigError(f"{self.lab}: spatial combinations must be >= 1")
        if not (self.has_drawer and self.has_microwave):
            raise ConfigError(f"{self.lab}: every lab needs a drawer and a microwave")
        if not self.has_stove:
            raise ConfigError(f"{self.lab}: every lab needs a stove")


def default_labs(count: int = DEFAULT_LAB_COUNT,
                 coffee_lab_index: int = 0,
                 spatial_combinations: int = DEFAULT_SPATIAL_COMBINATIONS) -> tuple:
    labs = []
    for i in range(count):
        objects = tuple(_OBJECT_POOL[(i + k) % len(_OBJECT_POOL)] for k in range(7))
        receptacles = ("bin", "drawer", "microwave") + (
            ("coffee-machine",) if i == coffee_lab_index else ()
        )
        labs.append(
            LabConfig(
                lab=f"lab{i + 1}",
                objects=objects,
                receptacles=receptacles,
                has_coffee_machine=(i == coffee_lab_index),
                spatial_combinations=spatial_combinations,
            )
        )
    return tuple(labs)


@dataclass(frozen=True)
class InstanceTemplate:
    name: str
    primitives: tuple
    count: int


@dataclass(frozen=True)
class LabEnumeration:
    lab: str
    templates: tuple
    base_count: int
    crossed_count: int


_APPLIANCES = ("drawer", "microwave")


def enumerate_lab(config: LabConfig) -> LabEnumeration:
    """Expand the task templates for one lab.

    Base templates: bin each of the 7 objects; open/close each of the 2
    appliances; open-then-store and store-then-close for each appliance and
    object pair (14 each); stove on and off.  A coffee-machine lab adds
    make-coffee.  The crossed count multiplies camera bins by the configured
    spatial combinations.
    """
    n_obj = len(config.objects)
    n_app = len(_APPLIANCES)
    templates = [
        InstanceTemplate("bin-object", ("pick", "placeBin"), n_obj),
        InstanceTemplate("open-appliance", ("open",), n_app),
        InstanceTemplate("close-appliance", ("close",), n_app),
        InstanceTemplate("open-pick-place", ("open", "pick", "place"), n_app * n_obj),
        InstanceTemplate("pick-place-close", ("pick", "place", "close"), n_app * n_obj),
        InstanceTemplate("stove-on", ("turnOn",), 1),
        InstanceTemplate("stove-off", ("turnOff",), 1),
    ]
    if config.has_coffee_machine:
        templates.append(InstanceTemplate("make-coffee", ("pick", "place", "close"), 1))
    base = sum(t.count for t in templates)
    crossed = len(config.camera_bins) * config.spatial_combinations
    return LabEnumeration(config.lab, tuple(templates), base, crossed)


def enumerate_instances(labs=None) -> list[LabEnumeration]:
    """Per-lab template expansion over a lab roster (default: 8 labs)."""
    labs = default_labs() if labs is None else labs
    return [enumerate_lab(cfg) for cfg in labs]


def enumeration_summary(enums) -> dict:
    return {
        "labs": [
            {
                "lab": e.lab,
                "templates": [
                    {"name": t.name, "primitives": list(t.primitives), "count": t.count}
                    for t in e.templates
                ],
                "base_count": e.base_count,
                "crossed_count": e.crossed_count,
            }
            for e in enums
        ],
        "total_base": sum(e.base_count for e in enums),
        "total_crossed": sum(e.crossed_count for e in enums),
    }


# ---------------------------------------------------------------------------
# trajectory segmentation and synthesis

@dataclass
class Segment:
    """Contiguous step run tagged with its primitive and anchor pose."""

    anchor_pos: np.ndarray   # (3,)
    anchor_quat: np.ndarray  # (4,) unit
    steps: Steps
    primitive: str


def _transition_indices(gripper: np.ndarray, window: int, threshold: float) -> np.ndarray:
    s = smooth_gripper(gripper, window)
    above = s >= threshold
    return np.flatnonzero(above[1:] != above[:-1]) + 1


def _slice_steps(steps: Steps, a: int, b: int) -> Steps:
    return Steps(
        t=steps.t[a:b].copy(),
        ee_pos=steps.ee_pos[a:b].copy(),
        ee_quat=steps.ee_quat[a:b].copy(),
        gripper=steps.gripper[a:b].copy(),
    )


def decompose(demo: DemoRecord, goal: PredicateSequence,
              window: int = GRIPPER_WINDOW,
              threshold: float = GRIPPER_THRESHOLD) -> list[Segment]:
    """Split a demo into one segment per goal primitive.

    Split points are the smoothed gripper open/close transitions: with
    transitions c_1..c_m matching the m primitives in order, each transition
    after the first ends the running segment (the transition step belongs to
    the preceding segment; the next segment starts one step later).  Segment i
    is anchored at the end-effector pose at its own transition c_i.
    """
    labels = goal.labels()
    transitions = _transition_indices(demo.steps.gripper, window, threshold)
    if len(transitions) != len(labels):
        raise SegmentationMismatch(
            f"{len(transitions)} gripper transitions vs {len(labels)} goal primitives"
        )
    n = len(demo.steps)
    starts = [0] + [int(c) + 1 for c in transitions[1:]]
    ends = [int(c) for c in transitions[1:]] + [n - 1]
    segments = []
    for i, label in enumerate(labels):
        a, b = starts[i], ends[i]
        if a > b:
            raise SegmentationMismatch(f"segment {i} for {label!r} is empty (steps {a}..{b})")
        c = int(transitions[i])
        segments.append(
            Segment(
                anchor_pos=demo.steps.ee_pos[c].copy(),
                anchor_quat=demo.steps.ee_quat[c].copy(),
                steps=_slice_steps(demo.steps, a, b + 1),
                primitive=label,
            )
        )
    return segments


def _quat_mul_many(q: np.ndarray, quats: np.ndarray) -> np.ndarray:
    """Hamilton product q ⊗ quats[i] for an (N, 4) array."""
    w, x, y, z = q
    qw, qx, qy, qz = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    return np.stack(
        [
            w * qw - x * qx - y * qy - z * qz,
            w * qx + x * qw + y * qz - z * qy,
            w * qy - x * qz + y * qw + z * qx,
            w * qz + x * qy - y * qx + z * qw,
        ],
        axis=1,
    )


def synthesize(segments, new_anchors, bridge_step: float,
               like: DemoRecord | None = None, new_id: str = "synth-0") -> DemoRecord:
    """Re-anchor segments rigidly and stitch them into one trajectory.

    Every step pose of segment i is mapped by T_i = new_anchor_i ∘
    old_anchor_i⁻¹.  Junctions wider than `bridge_step` are filled with
    linearly interpolated positions and spherically interpolated orientations
    at spacing ≤ bridge_step (the gripper holds its last value).  Output
    timestamps are renumbered from 0.
    """
    segments = list(segments)
    new_anchors = list(new_anchors)
    if len(segments) != len(new_anchors):
        raise ValueError(f"{len(segments)} segments vs {len(new_anchors)} anchors")
    if not segments:
        raise ValueError("at least one segment required")
    if bridge_step <= 0:
        raise ValueError(f"bridge_step must be > 0, got {bridge_step}")

    mapped = []
    for seg, (npos, nquat) in zip(segments, new_anchors):
        nquat = np.asarray(nquat, dtype=float)
        if not is_unit_quat(nquat):
            raise DegenerateAnchor(f"new anchor quaternion {nquat} is not unit norm")
        if not is_unit_quat(seg.anchor_quat):
            raise DegenerateAnchor(f"segment anchor quaternion {seg.anchor_quat} is not unit norm")
        inv_pos, inv_quat = pose_inverse(seg.anchor_pos, seg.anchor_quat)
        t_pos, t_quat = pose_compose(np.asarray(npos, dtype=float), nquat, inv_pos, inv_quat)
        pos = quat_rotate_many(t_quat, seg.steps.ee_pos) + t_pos
        quat = _quat_mul_many(t_quat, seg.steps.ee_quat)
        mapped.append((pos, quat, seg.steps.gripper.copy()))

    out_pos = [mapped[0][0]]
    out_quat = [mapped[0][1]]
    out_grip = [mapped[0][2]]
    for prev, cur in zip(mapped, mapped[1:]):
        a_pos, a_quat, a_grip = prev[0][-1], prev[1][-1], prev[2][-1]
        b_pos, b_quat = cur[0][0], cur[1][0]
        dist = float(np.linalg.norm(b_pos - a_pos))
        n_sub = max(int(math.ceil(dist / bridge_step)), 1)
        if n_sub > 1:
            fracs = np.arange(1, n_sub) / n_sub
            bridge_pos = a_pos + fracs[:, None] * (b_pos - a_pos)
            bridge_quat = np.array([quat_slerp(a_quat, b_quat, float(f)) for f in fracs])
            out_pos.append(bridge_pos)
            out_quat.append(bridge_quat)
            out_grip.append(np.full(n_sub - 1, a_grip))
        out_pos.append(cur[0])
        out_quat.append(cur[1])
        out_grip.append(cur[2])

    pos = np.concatenate(out_pos)
    quat = np.concatenate(out_quat)
    grip = np.concatenate(out_grip)
    steps = Steps(
        t=np.arange(len(pos), dtype=np.int64),
        ee_pos=pos,
        ee_quat=quat,
        gripper=grip,
    )
    if like is not None:
        return DemoRecord(
            id=new_id,
            lab=like.lab,
            instructions=like.instructions,
            camera_pos=like.camera_pos.copy(),
            camera_quat=like.camera_quat.copy(),
            steps=steps,
            annotations=None,
        )
    return DemoRecord(
        id=new_id,
        lab="synth",
        instructions=(),
        camera_pos=np.array([1.0, 0.0, 1.0]),
        camera_quat=np.array([1.0, 0.0, 0.0, 0.0]),
        steps=steps,
        annotations=None,
    )
