"""File formats: a little-endian binary tensor container and versioned JSON
documents for graphs, rigs, estimates, scenes, warped frames and tokens.

Every loader raises :class:`FormatError` (never anything else) on malformed
input; binary errors carry a byte offset, JSON errors a ``$``-rooted path.
Byte layouts are documented in ``docs/formats.md``.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from .bev_warp import BevGrid, WarpedFrame
from .camera_geometry import AXIS_CONVENTION, CameraIntrinsics, CameraRig, RigidTransform, rotation_problem
from .lane_graph import LaneGraph
from .postmerge import FrameEstimate
from .stetr import TokenSequence
from .synthetic import SyntheticScene
from .tensor_core import BinaryMask, FeatureMap

TENSOR_MAGIC = b"LGKT"
TENSOR_VERSION = 1
JSON_VERSION = 1
ROTATION_TOL = 1e-6
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    def __init__(self, message: str, offset: int | None = None, path: str | None = None):
        where = f" at byte {offset}" if offset is not None else f" at {path}" if path else ""
        super().__init__(f"{message}{where}")
        self.offset = offset
        self.path = path


# ---------------------------------------------------------------- tensors


def tensor_to_bytes(array) -> bytes:
    arr = np.asarray(array)
    if arr.ndim == 0:
        raise ValueError("cannot store a 0-d tensor")
    if any(d >= 2**32 for d in arr.shape):
        raise ValueError(f"dimension too large for the tensor format: {arr.shape}")
    header = _HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + dims + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    """Parse a tensor file into a float32 array of the stored shape."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise FormatError(f"expected bytes, got {type(data).__name__}", offset=0)
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise FormatError(f"file is {len(data)} bytes, shorter than the {_HEADER.size}-byte header", offset=0)
    magic, version, ndim = _HEADER.unpack_from(data, 0)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {TENSOR_MAGIC!r}", offset=0)
    if version != TENSOR_VERSION:
        raise FormatError(f"unsupported tensor version {version}", offset=4)
    if ndim == 0 or ndim > 8:
        raise FormatError(f"unsupported dimension count {ndim}", offset=8)
    dims_end = _HEADER.size + 4 * ndim
    if len(data) < dims_end:
        raise FormatError(f"header needs {dims_end} bytes for {ndim} dims, file has {len(data)}", offset=_HEADER.size)
    dims = struct.unpack_from(f"<{ndim}I", data, _HEADER.size)
    expected = 4 * int(np.prod(dims, dtype=object))
    actual = len(data) - dims_end
    if actual != expected:
        raise FormatError(f"payload is {actual} bytes, expected {expected} for dims {dims}", offset=dims_end)
    return np.frombuffer(data, dtype="<f4", offset=dims_end).reshape(dims).astype(np.float32)


def write_tensor(path, array) -> None:
    atomic_write(path, tensor_to_bytes(array))


def read_tensor(path) -> np.ndarray:
    return tensor_from_bytes(_read_bytes(path))


def write_feature_map(path, fm: FeatureMap) -> None:
    write_tensor(path, fm.data)


def feature_map_from_bytes(data: bytes) -> FeatureMap:
    arr = tensor_from_bytes(data)
    if arr.ndim != 3:
        raise FormatError(f"feature map needs 3 dims (H, W, C), file has {arr.ndim}", offset=8)
    if not np.all(np.isfinite(arr)):
        raise FormatError("feature map holds non-finite values", offset=_HEADER.size + 12)
    return FeatureMap(arr)


def read_feature_map(path) -> FeatureMap:
    return feature_map_from_bytes(_read_bytes(path))


# ---------------------------------------------------------------- JSON plumbing

_NUM = {"type": "number"}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_TRANSFORM = {
    "type": "object",
    "required": ["rotation", "translation"],
    "properties": {
        "rotation": {"type": "array", "items": _NUM, "minItems": 9, "maxItems": 9},
        "translation": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
    },
}


def _doc_schema(kind: str, required: list[str], properties: dict) -> dict:
    return {
        "type": "object",
        "required": ["format", "version", "axis_convention", *required],
        "properties": {
            "format": {"const": f"lgk.{kind}"},
            "version": {"const": JSON_VERSION},
            "axis_convention": {"const": AXIS_CONVENTION},
            **properties,
        },
    }


_GRAPH_BODY = {
    "centerlines": {"type": "array", "items": {"type": "array", "items": _POINT, "minItems": 3, "maxItems": 3}},
    "edges": {
        "type": "array",
        "items": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
    },
}
_RIG_BODY = {
    "fx": _NUM,
    "fy": _NUM,
    "cx": _NUM,
    "cy": _NUM,
    "cam_from_ego": _TRANSFORM,
    "ego_pose": _TRANSFORM,
    "camera_height": _NUM,
}
_RIG_REQUIRED = list(_RIG_BODY)

SCHEMAS = {
    "graph": _doc_schema("graph", ["centerlines", "edges"], _GRAPH_BODY),
    "rig": _doc_schema("rig", _RIG_REQUIRED, _RIG_BODY),
    "estimate": _doc_schema(
        "estimate",
        ["R", "P", "C", "Omega", "relative_time"],
        {
            "R": {"type": "array", "items": {"type": "array", "items": _POINT, "minItems": 3, "maxItems": 3}},
            "P": {"type": "array", "items": _NUM},
            "C": {"type": "array", "items": {"type": "array", "items": _NUM}},
            "Omega": {"type": "array", "items": {"type": "array", "items": _POINT, "minItems": 2}},
            "relative_time": _NUM,
        },
    ),
    "scene": _doc_schema(
        "scene",
        ["graph", "trajectory", "rig_template", "image_shape"],
        {
            "graph": {"type": "object", "required": ["centerlines", "edges"], "properties": _GRAPH_BODY},
            "trajectory": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["timestamp", "pose"],
                    "properties": {"timestamp": _NUM, "pose": _TRANSFORM},
                },
            },
            "rig_template": {"type": "object", "required": _RIG_REQUIRED, "properties": _RIG_BODY},
            "image_shape": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        },
    ),
    "warped": _doc_schema(
        "warped",
        ["relative_time", "grid", "mask"],
        {
            "relative_time": _NUM,
            "grid": {
                "type": "object",
                "required": ["x_min", "x_max", "z_min", "z_max", "resolution", "fov_margin"],
                "properties": {k: _NUM for k in ("x_min", "x_max", "z_min", "z_max", "resolution", "fov_margin")},
            },
            "mask": {"type": "array", "items": {"type": "string", "pattern": "^[01]*$"}},
        },
    ),
    "aggregate": _doc_schema(
        "aggregate",
        ["frame_count", "op", "cropped", "grid", "coverage"],
        {
            "frame_count": {"type": "integer", "minimum": 1},
            "op": {"enum": ["max", "mean"]},
            "cropped": {"type": "boolean"},
            "grid": {"type": "object"},
            "coverage": {"type": "array", "items": {"type": "string", "pattern": "^[01]*$"}},
        },
    ),
    "tokens": _doc_schema(
        "tokens",
        ["provenance", "offsets"],
        {
            "provenance": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 3, "maxItems": 3},
            },
            "offsets": {"type": "array", "items": _NUM},
        },
    ),
}
_VALIDATORS = {k: jsonschema.Draft202012Validator(s) for k, s in SCHEMAS.items()}


def _header(kind: str) -> dict:
    return {"format": f"lgk.{kind}", "version": JSON_VERSION, "axis_convention": AXIS_CONVENTION}


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def _load_doc(text, kind: str) -> dict:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"not UTF-8 text: {exc.reason}", offset=exc.start) from None
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", offset=exc.pos) from None
    except (ValueError, RecursionError) as exc:
        raise FormatError(f"invalid JSON: {exc}", path="$") from None
    error = jsonschema.exceptions.best_match(_VALIDATORS[kind].iter_errors(doc))
    if error is not None:
        raise FormatError(error.message, path=error.json_path)
    return doc


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} is not allowed")


def _transform_to_json(t: RigidTransform) -> dict:
    return {"rotation": t.rotation.reshape(-1).tolist(), "translation": t.translation.tolist()}


def _transform_from_json(doc: dict, path: str) -> RigidTransform:
    r = np.array(doc["rotation"], dtype=np.float64).reshape(3, 3)
    problem = rotation_problem(r, ROTATION_TOL)
    if problem:
        raise FormatError(problem, path=f"{path}.rotation")
    if rotation_problem(r, 1e-9):
        # within the file tolerance but not the in-memory one: snap to SO(3)
        u, _, vt = np.linalg.svd(r)
        r = u @ vt
    return RigidTransform(r, doc["translation"])


def _rig_to_json(rig: CameraRig) -> dict:
    k = rig.intrinsics
    return {
        "fx": k.fx,
        "fy": k.fy,
        "cx": k.cx,
        "cy": k.cy,
        "cam_from_ego": _transform_to_json(rig.cam_from_ego),
        "ego_pose": _transform_to_json(rig.ego_pose),
        "camera_height": rig.camera_height,
    }


def _rig_from_json(doc: dict, path: str) -> CameraRig:
    cam_from_ego = _transform_from_json(doc["cam_from_ego"], f"{path}.cam_from_ego")
    ego_pose = _transform_from_json(doc["ego_pose"], f"{path}.ego_pose")
    try:
        return CameraRig(CameraIntrinsics(doc["fx"], doc["fy"], doc["cx"], doc["cy"]), cam_from_ego, ego_pose, doc["camera_height"])
    except ValueError as exc:
        raise FormatError(str(exc), path=path) from None


def _graph_to_json(g: LaneGraph) -> dict:
    return {"centerlines": g.control_points.tolist(), "edges": [list(e) for e in g.edges()]}


def _graph_from_json(doc: dict, path: str) -> LaneGraph:
    n = len(doc["centerlines"])
    cps = np.array(doc["centerlines"], dtype=np.float64).reshape(n, 3, 2)
    inc = np.zeros((n, n), dtype=bool)
    for k, (a, b) in enumerate(doc["edges"]):
        if a >= n or b >= n:
            raise FormatError(f"edge ({a}, {b}) refers to a missing centerline", path=f"{path}.edges[{k}]")
        if a == b:
            raise FormatError(f"self-loop on centerline {a}", path=f"{path}.edges[{k}]")
        inc[a, b] = True
    return LaneGraph.from_control_points(cps, inc)


def _wrap(fn, *args):
    # turn stray ValueErrors from domain constructors into FormatError
    try:
        return fn(*args)
    except FormatError:
        raise
    except (ValueError, TypeError, IndexError, KeyError) as exc:
        raise FormatError(str(exc), path="$") from None


# ---------------------------------------------------------------- graph


def graph_to_json(g: LaneGraph) -> str:
    return _dumps({**_header("graph"), **_graph_to_json(g)})


def graph_from_json(text) -> LaneGraph:
    return _wrap(_graph_from_json, _load_doc(text, "graph"), "$")


def write_graph(path, g: LaneGraph) -> None:
    atomic_write(path, graph_to_json(g).encode())


def read_graph(path) -> LaneGraph:
    return graph_from_json(_read_bytes(path))


# ---------------------------------------------------------------- rig


def rig_to_json(rig: CameraRig) -> str:
    return _dumps({**_header("rig"), **_rig_to_json(rig)})


def rig_from_json(text) -> CameraRig:
    return _wrap(_rig_from_json, _load_doc(text, "rig"), "$")


def write_rig(path, rig: CameraRig) -> None:
    atomic_write(path, rig_to_json(rig).encode())


def read_rig(path) -> CameraRig:
    return rig_from_json(_read_bytes(path))


# ---------------------------------------------------------------- estimate


def estimate_to_json(e: FrameEstimate) -> str:
    return _dumps(
        {
            **_header("estimate"),
            "R": e.control_points.tolist(),
            "P": e.probabilities.tolist(),
            "C": e.connectivity.tolist(),
            "Omega": e.polylines.tolist(),
            "relative_time": float(e.relative_time),
        }
    )


def _estimate_from_json(doc: dict) -> FrameEstimate:
    q = len(doc["R"])
    if len(doc["P"]) != q:
        raise FormatError(f"{len(doc['P'])} probabilities for {q} centerlines", path="$.P")
    if len(doc["C"]) != q or any(len(row) != q for row in doc["C"]):
        raise FormatError(f"connectivity must be {q}x{q}", path="$.C")
    if len(doc["Omega"]) != q:
        raise FormatError(f"{len(doc['Omega'])} polylines for {q} centerlines", path="$.Omega")
    widths = {len(p) for p in doc["Omega"]}
    if len(widths) > 1:
        raise FormatError("polylines differ in point count", path="$.Omega")
    omega = np.array(doc["Omega"], dtype=np.float64).reshape(q, widths.pop() if widths else 2, 2)
    return FrameEstimate(doc["R"], doc["P"], doc["C"], omega, doc["relative_time"])


def estimate_from_json(text) -> FrameEstimate:
    return _wrap(_estimate_from_json, _load_doc(text, "estimate"))


def write_estimate(path, e: FrameEstimate) -> None:
    atomic_write(path, estimate_to_json(e).encode())


def read_estimate(path) -> FrameEstimate:
    return estimate_from_json(_read_bytes(path))


# ---------------------------------------------------------------- scene


def scene_to_json(scene: SyntheticScene) -> str:
    return _dumps(
        {
            **_header("scene"),
            "graph": _graph_to_json(scene.gt_graph),
            "trajectory": [
                {"timestamp": t, "pose": _transform_to_json(p)} for t, p in zip(scene.timestamps, scene.poses)
            ],
            "rig_template": _rig_to_json(scene.rig_template),
            "image_shape": list(scene.image_shape),
        }
    )


def _scene_from_json(doc: dict) -> SyntheticScene:
    graph = _graph_from_json(doc["graph"], "$.graph")
    times = tuple(float(s["timestamp"]) for s in doc["trajectory"])
    poses = tuple(_transform_from_json(s["pose"], f"$.trajectory[{k}].pose") for k, s in enumerate(doc["trajectory"]))
    rig = _rig_from_json(doc["rig_template"], "$.rig_template")
    return SyntheticScene(graph, times, poses, rig, tuple(doc["image_shape"]))


def scene_from_json(text) -> SyntheticScene:
    return _wrap(_scene_from_json, _load_doc(text, "scene"))


def write_scene(path, scene: SyntheticScene) -> None:
    atomic_write(path, scene_to_json(scene).encode())


def read_scene(path) -> SyntheticScene:
    return scene_from_json(_read_bytes(path))


# ---------------------------------------------------------------- warped frames


def _grid_to_json(g: BevGrid) -> dict:
    return {k: getattr(g, k) for k in ("x_min", "x_max", "z_min", "z_max", "resolution", "fov_margin")}


def warped_sidecar_to_json(w: WarpedFrame) -> str:
    doc = {**_header("warped"), "relative_time": w.relative_time, "grid": _grid_to_json(w.grid), "mask": _mask_rows(w.mask)}
    return _dumps(doc)


def _warped_from_json(doc: dict, features: FeatureMap) -> WarpedFrame:
    rows = doc["mask"]
    if len({len(r) for r in rows}) > 1:
        raise FormatError("mask rows differ in length", path="$.mask")
    mask = np.array([[c == "1" for c in r] for r in rows], dtype=bool).reshape(len(rows), len(rows[0]) if rows else 0)
    grid = BevGrid(**doc["grid"])
    if mask.shape != grid.fov_shape:
        raise FormatError(f"mask is {mask.shape}, grid expects {grid.fov_shape}", path="$.mask")
    return WarpedFrame(features, BinaryMask(mask), doc["relative_time"], grid)


def write_warped(prefix, w: WarpedFrame) -> tuple[Path, Path]:
    """Write ``<prefix>.lgkt`` (features) and ``<prefix>.json`` (mask, time, grid)."""
    prefix = Path(prefix)
    tensor_path = prefix.with_suffix(".lgkt")
    json_path = prefix.with_suffix(".json")
    write_feature_map(tensor_path, w.features)
    atomic_write(json_path, warped_sidecar_to_json(w).encode())
    return tensor_path, json_path


def read_warped(prefix) -> WarpedFrame:
    prefix = Path(prefix)
    features = read_feature_map(prefix.with_suffix(".lgkt"))
    doc = _load_doc(_read_bytes(prefix.with_suffix(".json")), "warped")
    return _wrap(_warped_from_json, doc, features)


def _mask_rows(mask: BinaryMask) -> list[str]:
    return ["".join("1" if b else "0" for b in row) for row in mask.data]


def write_aggregate(prefix, features: FeatureMap, coverage: BinaryMask, frame_count: int, op: str, grid: BevGrid, cropped: bool):
    """Aggregated map as ``<prefix>.lgkt`` plus a ``<prefix>.json`` sidecar."""
    prefix = Path(prefix)
    write_feature_map(prefix.with_suffix(".lgkt"), features)
    doc = {
        **_header("aggregate"),
        "frame_count": frame_count,
        "op": op,
        "cropped": cropped,
        "grid": _grid_to_json(grid),
        "coverage": _mask_rows(coverage),
    }
    atomic_write(prefix.with_suffix(".json"), _dumps(doc).encode())


def read_aggregate(prefix) -> tuple[FeatureMap, dict]:
    prefix = Path(prefix)
    return read_feature_map(prefix.with_suffix(".lgkt")), _load_doc(_read_bytes(prefix.with_suffix(".json")), "aggregate")


# ---------------------------------------------------------------- tokens


def write_tokens(prefix, seq: TokenSequence, offsets) -> tuple[Path, Path]:
    prefix = Path(prefix)
    tensor_path = prefix.with_suffix(".lgkt")
    json_path = prefix.with_suffix(".json")
    write_tensor(tensor_path, seq.tokens)
    doc = {**_header("tokens"), "provenance": seq.provenance.tolist(), "offsets": [float(t) for t in offsets]}
    atomic_write(json_path, _dumps(doc).encode())
    return tensor_path, json_path


def read_tokens(prefix) -> tuple[TokenSequence, list[float]]:
    prefix = Path(prefix)
    tokens = read_tensor(prefix.with_suffix(".lgkt"))
    doc = _load_doc(_read_bytes(prefix.with_suffix(".json")), "tokens")
    prov = np.array(doc["provenance"], dtype=np.int64).reshape(-1, 3)
    if tokens.ndim != 2 or tokens.shape[0] != len(prov):
        raise FormatError(f"{len(prov)} provenance rows for token tensor of shape {tokens.shape}", path="$.provenance")
    return TokenSequence(tokens, prov), doc["offsets"]


# ---------------------------------------------------------------- files


def atomic_write(path, data: bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_bytes(path) -> bytes:
    return Path(path).read_bytes()
