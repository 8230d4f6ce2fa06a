"""Indexed DV-aligned retrieval over annotated corpora.

Queries are conjunctions of per-DV filters with closed (inclusive) boundary
semantics: camera position within per-axis tolerances of a target (defaults
0.20/0.20/0.10 m), object position within an axis-aligned cuboid (default
extents 0.60/0.60/0.30 m), target-object include/exclude, canonical color,
and motion-primitive labels.  A DemoIndex answers them via hash indexes and
uniform 0.1 m spatial grids; results always equal a linear scan and come back
in record insertion order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lexicon as lexmod
from . import sexpr
from .errors import DuplicateId, SpecRangeError, SpecSyntaxError

CAMPOSE_TOL_DEFAULT = (0.20, 0.20, 0.10)
OBJSPAT_EXTENT_DEFAULT = (0.60, 0.60, 0.30)
GRID_CELL = 0.1


@dataclass(frozen=True)
class RetrievalQuery:
    """Conjunction of alignment filters; at least one must be present."""

    object_include: str | None = None
    object_exclude: str | None = None
    campose_target: tuple[float, float, float] | None = None
    campose_tol: tuple[float, float, float] = CAMPOSE_TOL_DEFAULT
    objspat_center: tuple[float, float, float] | None = None
    objspat_extent: tuple[float, float, float] = OBJSPAT_EXTENT_DEFAULT
    color: str | None = None
    motion: frozenset | None = None

    def __post_init__(self):
        if self.object_include is not None and self.object_exclude is not None:
            raise SpecRangeError("object", "include and exclude are mutually exclusive")
        if not any(
            f is not None
            for f in (
                self.object_include,
                self.object_exclude,
                self.campose_target,
                self.objspat_center,
                self.color,
                self.motion,
            )
        ):
            raise SpecRangeError("query", "at least one filter required")
        for name, triple in (("campose.tol", self.campose_tol), ("objspat.extent", self.objspat_extent)):
            if len(triple) != 3 or any(v <= 0 for v in triple):
                raise SpecRangeError(name, f"all components must be > 0, got {triple}")
        if self.motion is not None and not self.motion:
            raise SpecRangeError("motion", "motion filter must name at least one primitive")


def _triple(args, kw) -> tuple[float, float, float]:
    if len(args) != 3:
        raise SpecSyntaxError(f":{kw.name} takes exactly three numbers", kw.line, kw.col)
    return tuple(sexpr.as_number(a, f":{kw.name}").value for a in args)


def _parse_object(form) -> tuple[str | None, str | None]:
    head = sexpr.head_symbol(form)
    if head.name not in ("include", "exclude"):
        raise SpecSyntaxError("expected (include ...) or (exclude ...)", head.line, head.col)
    if len(form.items) != 2:
        raise SpecSyntaxError(f"({head.name} ...) takes exactly one object name", head.line, head.col)
    name = sexpr.as_string(form.items[1], "object name").value
    return (name, None) if head.name == "include" else (None, name)


def _keyword_form(args, kw) -> sexpr.SList:
    if len(args) != 1 or not isinstance(args[0], sexpr.SList):
        raise SpecSyntaxError(f":{kw.name} takes exactly one (...) form", kw.line, kw.col)
    return args[0]


def parse_query(source: str) -> RetrievalQuery:
    """Parse one query form.

    Grammar:

        (query
          :object (include STR) | (exclude STR)
          :campose (:pos X Y Z [:tol DX DY DZ])
          :objspat (:center X Y Z [:extent EX EY EZ])
          :color STR
          :motion PRIM...)
    """
    return query_from_form(sexpr.read_one(source))


def query_from_form(form: sexpr.Form) -> RetrievalQuery:
    sexpr.head_symbol(form, "query")
    values: dict = {}
    for kw, args in sexpr.keyword_fields(form.items[1:], "(query ...)"):
        if kw.name == "object":
            if len(args) != 1:
                raise SpecSyntaxError(":object takes exactly one form", kw.line, kw.col)
            values["object_include"], values["object_exclude"] = _parse_object(args[0])
        elif kw.name == "campose":
            sub = _keyword_form(args, kw)
            pos = tol = None
            for skw, sargs in sexpr.keyword_fields(sub.items, "(:pos ...)"):
                if skw.name == "pos":
                    pos = _triple(sargs, skw)
                elif skw.name == "tol":
                    tol = _triple(sargs, skw)
                else:
                    raise SpecSyntaxError(f"unknown campose field :{skw.name}", skw.line, skw.col)
            if pos is None:
                raise SpecSyntaxError(":campose requires :pos", kw.line, kw.col)
            values["campose_target"] = pos
            if tol is not None:
                values["campose_tol"] = tol
        elif kw.name == "objspat":
            sub = _keyword_form(args, kw)
            center = extent = None
            for skw, sargs in sexpr.keyword_fields(sub.items, "(:center ...)"):
                if skw.name == "center":
                    center = _triple(sargs, skw)
                elif skw.name == "extent":
                    extent = _triple(sargs, skw)
                else:
                    raise SpecSyntaxError(f"unknown objspat field :{skw.name}", skw.line, skw.col)
            if center is None:
                raise SpecSyntaxError(":objspat requires :center", kw.line, kw.col)
            values["objspat_center"] = center
            if extent is not None:
                values["objspat_extent"] = extent
        elif kw.name == "color":
            if len(args) != 1:
                raise SpecSyntaxError(":color takes exactly one string", kw.line, kw.col)
            values["color"] = sexpr.as_string(args[0], ":color").value
        elif kw.name == "motion":
            if not args:
                raise SpecSyntaxError(":motion takes at least one primitive", kw.line, kw.col)
            values["motion"] = frozenset(sexpr.as_symbol(a, "primitive").name for a in args)
        else:
            raise SpecSyntaxError(f"unknown query field :{kw.name}", kw.line, kw.col)
    return RetrievalQuery(**values)


def parse_query_file(path) -> list[RetrievalQuery]:
    with open(path, encoding="utf-8") as fh:
        return [query_from_form(f) for f in sexpr.read_all(fh.read())]


# ---------------------------------------------------------------------------
# index

class DemoIndex:
    """Immutable retrieval index over annotated records."""

    def __init__(self, ids, camera_pos, object_pos, has_object_pos,
                 by_object, by_color, by_motion, camera_grid, object_grid,
                 missing, cell: float = GRID_CELL):
        self.ids = ids
        self.camera_pos = camera_pos
        self.object_pos = object_pos
        self.has_object_pos = has_object_pos
        self.by_object = by_object
        self.by_color = by_color
        self.by_motion = by_motion
        self.camera_grid = camera_grid
        self.object_grid = object_grid
        self.missing = missing
        self.cell = cell

    def __len__(self) -> int:
        return len(self.ids)


def _grid_group(points: np.ndarray, ordinals: np.ndarray, cell: float) -> dict:
    """Map grid-cell coordinates to the ordinals whose points fall inside."""
    if len(points) == 0:
        return {}
    cells = np.floor(points / cell).astype(np.int64)
    order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
    cells = cells[order]
    ords = ordinals[order]
    change = np.flatnonzero(np.any(cells[1:] != cells[:-1], axis=1)) + 1
    bounds = np.concatenate(([0], change, [len(cells)]))
    grid = {}
    for a, b in zip(bounds[:-1], bounds[1:]):
        grid[tuple(int(v) for v in cells[a])] = np.sort(ords[a:b])
    return grid


def build_index(records, cell: float = GRID_CELL, lexicon=None) -> DemoIndex:
    """Build a DemoIndex from an iterable of annotated DemoRecords.

    Records lacking an annotation are indexed as non-matching for the filters
    that need it and listed in `index.missing`.  Duplicate ids abort the build.
    """
    ids: list[str] = []
    seen: dict[str, int] = {}
    cam_rows: list = []
    obj_rows: list = []
    obj_ordinals: list = []
    by_object: dict[str, list] = {}
    by_color: dict[str, list] = {}
    by_motion: dict[str, list] = {}
    missing = {"target_object": [], "object_position": [], "object_color": [], "motion": []}
    motion_memo: dict[tuple[str, ...], frozenset[str]] = {}
    for rec in records:
        if rec.id in seen:
            raise DuplicateId(f"duplicate record id {rec.id!r}")
        ordinal = len(ids)
        seen[rec.id] = ordinal
        ids.append(rec.id)
        cam_rows.append(rec.camera_pos)
        ann = rec.annotations
        if ann and ann.target_object:
            by_object.setdefault(ann.target_object, []).append(ordinal)
        else:
            missing["target_object"].append(rec.id)
        if ann and ann.object_position is not None:
            obj_rows.append(ann.object_position)
            obj_ordinals.append(ordinal)
        else:
            missing["object_position"].append(rec.id)
        if ann and ann.object_color:
            by_color.setdefault(ann.object_color, []).append(ordinal)
        else:
            missing["object_color"].append(rec.id)
        labels = motion_memo.get(rec.instructions)
        if labels is None:
            labels = lexmod.motion_labels(rec.instructions, lexicon) if rec.instructions else frozenset()
            motion_memo[rec.instructions] = labels
        if labels:
            for label in labels:
                by_motion.setdefault(label, []).append(ordinal)
        else:
            missing["motion"].append(rec.id)

    n = len(ids)
    camera_pos = np.asarray(cam_rows, dtype=np.float64).reshape(n, 3)
    object_pos = np.full((n, 3), np.nan)
    has_object_pos = np.zeros(n, dtype=bool)
    if obj_ordinals:
        obj_ordinals = np.asarray(obj_ordinals, dtype=np.int64)
        obj_points = np.asarray(obj_rows, dtype=np.float64)
        object_pos[obj_ordinals] = obj_points
        has_object_pos[obj_ordinals] = True
        object_grid = _grid_group(obj_points, obj_ordinals, cell)
    else:
        object_grid = {}
    camera_grid = _grid_group(camera_pos, np.arange(n, dtype=np.int64), cell)
    return DemoIndex(
        ids=ids,
        camera_pos=camera_pos,
        object_pos=object_pos,
        has_object_pos=has_object_pos,
        by_object={k: np.asarray(v, dtype=np.int64) for k, v in by_object.items()},
        by_color={k: np.asarray(v, dtype=np.int64) for k, v in by_color.items()},
        by_motion={k: np.asarray(v, dtype=np.int64) for k, v in by_motion.items()},
        camera_grid=camera_grid,
        object_grid=object_grid,
        missing=missing,
        cell=cell,
    )


def _grid_candidates(grid: dict, cell: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Ordinals from every grid cell overlapping the closed box [lo, hi]."""
    lo_cell = np.floor(lo / cell).astype(np.int64)
    hi_cell = np.floor(hi / cell).astype(np.int64)
    chunks = []
    for cx in range(int(lo_cell[0]), int(hi_cell[0]) + 1):
        for cy in range(int(lo_cell[1]), int(hi_cell[1]) + 1):
            for cz in range(int(lo_cell[2]), int(hi_cell[2]) + 1):
                hit = grid.get((cx, cy, cz))
                if hit is not None:
                    chunks.append(hit)
    if not chunks:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(chunks)


def _box_mask(index: DemoIndex, grid: dict, points: np.ndarray,
              center: np.ndarray, half: np.ndarray) -> np.ndarray:
    mask = np.zeros(len(index), dtype=bool)
    cand = _grid_candidates(grid, index.cell, center - half, center + half)
    if cand.size:
        inside = np.all(np.abs(points[cand] - center) <= half, axis=1)
        mask[cand[inside]] = True
    return mask


def _filter_masks(index: DemoIndex, query: RetrievalQuery) -> list[tuple[str, np.ndarray]]:
    """(name, mask) per present filter, in canonical report order."""
    n = len(index)
    out = []
    if query.object_include is not None or query.object_exclude is not None:
        mask = np.zeros(n, dtype=bool)
        if query.object_include is not None:
            hit = index.by_object.get(query.object_include)
            if hit is not None:
                mask[hit] = True
        else:
            for name, ordinals in index.by_object.items():
                if name != query.object_exclude:
                    mask[ordinals] = True
        out.append(("object", mask))
    if query.campose_target is not None:
        out.append(
            (
                "camPose",
                _box_mask(
                    index,
                    index.camera_grid,
                    index.camera_pos,
                    np.asarray(query.campose_target, dtype=float),
                    np.asarray(query.campose_tol, dtype=float),
                ),
            )
        )
    if query.objspat_center is not None:
        out.append(
            (
                "objSpat",
                _box_mask(
                    index,
                    index.object_grid,
                    index.object_pos,
                    np.asarray(query.objspat_center, dtype=float),
                    np.asarray(query.objspat_extent, dtype=float) / 2.0,
                ),
            )
        )
    if query.color is not None:
        mask = np.zeros(n, dtype=bool)
        hit = index.by_color.get(query.color)
        if hit is not None:
            mask[hit] = True
        out.append(("color", mask))
    if query.motion is not None:
        mask = np.zeros(n, dtype=bool)
        for label in query.motion:
            hit = index.by_motion.get(label)
            if hit is not None:
                mask[hit] = True
        out.append(("motion", mask))
    return out


def retrieve(index: DemoIndex, query: RetrievalQuery) -> list[str]:
    """Ids of records matching every filter, in insertion order."""
    masks = _filter_masks(index, query)
    combined = masks[0][1]
    for _, m in masks[1:]:
        combined = combined & m
    return [index.ids[i] for i in np.flatnonzero(combined)]


def retrieval_report(index: DemoIndex, query: RetrievalQuery) -> dict:
    """Stagewise conjunction counts plus the effective filter parameters."""
    masks = _filter_masks(index, query)
    stages = []
    combined = np.ones(len(index), dtype=bool)
    for name, m in masks:
        combined = combined & m
        stages.append({"filter": name, "count": int(combined.sum())})
    params: dict = {}
    if query.campose_target is not None:
        params["campose_target"] = list(query.campose_target)
        params["campose_tol"] = list(query.campose_tol)
    if query.objspat_center is not None:
        params["objspat_center"] = list(query.objspat_center)
        params["objspat_extent"] = list(query.objspat_extent)
    return {
        "total_records": len(index),
        "stages": stages,
        "final_count": stages[-1]["count"] if stages else 0,
        "params": params,
        "missing_annotations": {k: len(v) for k, v in index.missing.items()},
    }
