"""Shared builders and definitional oracles for the test suite.

The oracles here are written straight from the documented definitions
(centered truncated moving average, threshold crossings, linear-scan
retrieval) so the optimized implementations are checked against independent
code, not against themselves.
"""

from __future__ import annotations

import json
import pathlib

import numpy as np
import pytest

from dvcurate import metadata
from dvcurate.geometry import cartesian_from_spherical

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> pathlib.Path:
    return DATA_DIR


# ---------------------------------------------------------------------------
# definitional gripper oracles

def brute_smooth(gripper, window=metadata.GRIPPER_WINDOW):
    """Centered moving average, truncated at the edges, by direct summation."""
    g = list(gripper)
    n = len(g)
    half = window // 2
    out = []
    for i in range(n):
        lo = max(i - half, 0)
        hi = min(i + half + 1, n)
        out.append(sum(g[lo:hi]) / (hi - lo))
    return np.array(out)


def brute_transitions(gripper, window=metadata.GRIPPER_WINDOW,
                      threshold=metadata.GRIPPER_THRESHOLD):
    """Indices where the smoothed signal crosses the threshold either way."""
    s = brute_smooth(gripper, window)
    out = []
    for i in range(1, len(s)):
        if (s[i] >= threshold) != (s[i - 1] >= threshold):
            out.append(i)
    return out


def brute_close_index(gripper, window=metadata.GRIPPER_WINDOW,
                      threshold=metadata.GRIPPER_THRESHOLD):
    s = brute_smooth(gripper, window)
    for i in range(1, len(s)):
        if s[i] >= threshold and s[i - 1] < threshold:
            return i
    return None


# ---------------------------------------------------------------------------
# demo-record builders

def step_gripper(n, close_at, release_at=None):
    """0/1 gripper signal closing at `close_at` and releasing at `release_at`."""
    g = []
    for i in range(n):
        closed = i >= close_at and (release_at is None or i < release_at)
        g.append(1.0 if closed else 0.0)
    return g


def demo_row(rid="demo-0", lab="lab1", instructions=("pick up the mug",),
             camera_pos=(0.64, 0.0, 0.64), camera_quat=(1.0, 0.0, 0.0, 0.0),
             n=120, close_at=30, release_at=80, obj_pos=(0.2, 0.0, 0.02),
             place_pos=(0.3, 0.2, 0.05), annotations=None):
    """One corpus row as a plain JSON-ready dict.

    The end effector moves start -> obj_pos while open, obj_pos -> place_pos
    while closed, then retreats; the gripper is a step signal around
    [close_at, release_at).
    """
    start = np.array([0.0, -0.4, 0.4])
    obj = np.asarray(obj_pos, dtype=float)
    place = np.asarray(place_pos, dtype=float)
    grip = step_gripper(n, close_at, release_at)
    rel = release_at if release_at is not None else n - 1
    steps = []
    for i in range(n):
        if i <= close_at:
            a = i / max(close_at, 1)
            p = start * (1 - a) + obj * a
        elif i <= rel:
            a = (i - close_at) / max(rel - close_at, 1)
            p = obj * (1 - a) + place * a
        else:
            a = (i - rel) / max(n - 1 - rel, 1)
            p = place * (1 - a) + start * a
        steps.append({"t": i, "ee_pos": [float(v) for v in p],
                      "ee_quat": [1.0, 0.0, 0.0, 0.0], "gripper": grip[i]})
    return {
        "id": rid,
        "lab": lab,
        "instructions": list(instructions),
        "camera_extrinsics": {"pos": [float(v) for v in camera_pos],
                              "quat": [float(v) for v in camera_quat]},
        "steps": steps,
        "annotations": annotations,
    }


def make_record(**kwargs) -> metadata.DemoRecord:
    return metadata.parse_record(demo_row(**kwargs))


def write_jsonl(path, rows) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":")))
            fh.write("\n")
    return str(path)


def bin_camera_pos(label, r=0.9, center=(0.0, 0.0, 0.0)):
    """A camera position at the angular center of a default camera bin."""
    azimuths = {"agent-front": 0.0, "agent-left": 60.0, "agent-right": -60.0,
                "shoulder-left": 120.0, "shoulder-right": -120.0}
    return cartesian_from_spherical(r, 45.0, azimuths[label], center=center)
