"""File formats and dataset-sample layout.

Everything here is byte-deterministic: JSON floats are emitted with 17
significant digits, PFM is always written little-endian (scale -1.0,
bottom row first), images quantize with round-half-even, and the PLY
and tensor containers write fields in a fixed order.  Writing the same
data twice yields identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    IncongruentGrids,
    IoFailure,
    MalformedHeader,
    MissingFile,
    SizeMismatch,
)
from .geometry import (
    CameraIntrinsics,
    FlowField,
    PlaneParams,
    RigidMotion,
    ScalarMap,
)
from .imaging import Image
from .planefit import PointCloud

_WHITESPACE = b" \t\r\n\f\v"


def _read_bytes(path) -> bytes:
    p = Path(path)
    try:
        return p.read_bytes()
    except FileNotFoundError:
        raise MissingFile(str(p)) from None
    except OSError as e:
        raise IoFailure(f"cannot read {p}: {e}") from e


def _write_bytes(path, data: bytes) -> None:
    p = Path(path)
    try:
        p.write_bytes(data)
    except OSError as e:
        raise IoFailure(f"cannot write {p}: {e}") from e


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Whitespace-delimited token, skipping '#' comment lines."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c in _WHITESPACE:
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos : pos + 1] not in _WHITESPACE:
        pos += 1
    if start == pos:
        raise MalformedHeader("unexpected end of header")
    return buf[start:pos], pos


def _token_int(buf: bytes, pos: int) -> tuple[int, int]:
    tok, pos = _next_token(buf, pos)
    try:
        return int(tok), pos
    except ValueError:
        raise MalformedHeader(f"expected integer, got {tok!r}") from None


# -- PFM ---------------------------------------------------------------------

def write_pfm(path, array: np.ndarray) -> None:
    """Write (H, W) as 'Pf' or (H, W, 3) as 'PF', float32 little-endian."""
    a = np.asarray(array, dtype=np.float64)
    if a.ndim == 2:
        magic = b"Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"PFM stores (H, W) or (H, W, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("PFM payload must be finite")
    h, w = a.shape[:2]
    header = magic + b"\n" + f"{w} {h}".encode() + b"\n-1.0\n"
    payload = np.ascontiguousarray(np.flipud(a)).astype("<f4").tobytes()
    _write_bytes(path, header + payload)


def read_pfm(path) -> np.ndarray:
    """Read a PFM file; returns float64 (H, W) or (H, W, 3).

    Endianness follows the sign of the scale token (big-endian files
    read fine); rows are stored bottom-up per the format.
    """
    buf = _read_bytes(path)
    magic, pos = _next_token(buf, 0)
    if magic not in (b"Pf", b"PF"):
        raise MalformedHeader(f"not a PFM file (magic {magic!r})")
    w, pos = _token_int(buf, pos)
    h, pos = _token_int(buf, pos)
    scale_tok, pos = _next_token(buf, pos)
    try:
        scale = float(scale_tok)
    except ValueError:
        raise MalformedHeader(f"bad scale token {scale_tok!r}") from None
    if w <= 0 or h <= 0:
        raise MalformedHeader(f"bad dimensions {w}x{h}")
    if scale == 0.0:
        raise MalformedHeader("scale must be non-zero")
    pos += 1  # exactly one whitespace byte separates header and payload
    channels = 3 if magic == b"PF" else 1
    count = w * h * channels
    if len(buf) - pos < 4 * count:
        raise SizeMismatch(
            f"payload holds {len(buf) - pos} bytes, header promises {4 * count}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    flat = np.frombuffer(buf, dtype=dtype, count=count, offset=pos)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return np.flipud(flat.reshape(shape)).astype(np.float64)


def write_flow_pfm(path, flow_values: np.ndarray) -> None:
    """Store (H, W, 2) flow as 3-channel PFM with a zero third channel."""
    u = np.asarray(flow_values, dtype=np.float64)
    if u.ndim != 3 or u.shape[2] != 2:
        raise ValueError(f"flow must be (H, W, 2), got {u.shape}")
    padded = np.concatenate([u, np.zeros(u.shape[:2] + (1,))], axis=2)
    write_pfm(path, padded)


def read_flow_pfm(path) -> np.ndarray:
    a = read_pfm(path)
    if a.ndim != 3:
        raise MalformedHeader("flow PFM must be 3-channel")
    return a[..., :2]


# -- PPM / PGM ---------------------------------------------------------------

def write_image(path, image: Image) -> None:
    """P6 (RGB) or P5 (gray) binary, maxval 255, round-to-nearest."""
    q = np.rint(np.clip(image.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = image.shape
    if image.channels == 3:
        header = b"P6\n" + f"{w} {h}\n255\n".encode()
        payload = q.tobytes()
    else:
        header = b"P5\n" + f"{w} {h}\n255\n".encode()
        payload = q[..., 0].tobytes()
    _write_bytes(path, header + payload)


def _read_pnm(path) -> tuple[bytes, int, int, np.ndarray]:
    buf = _read_bytes(path)
    magic, pos = _next_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise MalformedHeader(f"unsupported PNM magic {magic!r}")
    w, pos = _token_int(buf, pos)
    h, pos = _token_int(buf, pos)
    maxval, pos = _token_int(buf, pos)
    if w <= 0 or h <= 0:
        raise MalformedHeader(f"bad dimensions {w}x{h}")
    if maxval != 255:
        raise MalformedHeader(f"only maxval 255 is supported, got {maxval}")
    pos += 1
    channels = 3 if magic == b"P6" else 1
    count = w * h * channels
    if len(buf) - pos < count:
        raise SizeMismatch(
            f"payload holds {len(buf) - pos} bytes, header promises {count}"
        )
    data = np.frombuffer(buf, dtype=np.uint8, count=count, offset=pos)
    return magic, w, h, data


def read_image(path) -> Image:
    magic, w, h, data = _read_pnm(path)
    if magic == b"P6":
        arr = data.reshape(h, w, 3)
    else:
        arr = data.reshape(h, w)[:, :, None]
    return Image(arr.astype(np.float64) / 255.0)


def write_mask(path, mask: np.ndarray) -> None:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    q = np.where(m.astype(bool), 255, 0).astype(np.uint8)
    h, w = m.shape
    _write_bytes(path, b"P5\n" + f"{w} {h}\n255\n".encode() + q.tobytes())


def read_mask(path) -> np.ndarray:
    magic, w, h, data = _read_pnm(path)
    if magic != b"P5":
        raise MalformedHeader("masks must be single-channel PGM")
    return data.reshape(h, w) >= 128


# -- PLY ---------------------------------------------------------------------

def write_point_cloud(path, cloud: PointCloud) -> None:
    """ASCII PLY with float x/y/z and an optional uchar road label."""
    n = len(cloud)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if cloud.labels is not None:
        lines.append("property uchar label")
    lines.append("end_header")
    rows = []
    for i in range(n):
        x, y, z = cloud.points[i]
        row = f"{x:.17g} {y:.17g} {z:.17g}"
        if cloud.labels is not None:
            row += f" {int(cloud.labels[i])}"
        rows.append(row)
    text = "\n".join(lines + rows) + "\n"
    _write_bytes(path, text.encode("ascii"))


def read_point_cloud(path) -> PointCloud:
    text = _read_bytes(path).decode("ascii", errors="replace")
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MalformedHeader("not a PLY file")
    n = None
    props: list[tuple[str, str]] = []
    body_at = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise MalformedHeader("only ascii PLY is supported")
        elif parts[0] == "element":
            if parts[1] != "vertex":
                raise MalformedHeader(f"unsupported element {parts[1]!r}")
            n = int(parts[2])
        elif parts[0] == "property":
            props.append((parts[1], parts[2]))
        elif parts[0] == "end_header":
            body_at = i + 1
            break
    if n is None or body_at is None:
        raise MalformedHeader("incomplete PLY header")
    names = [p[1] for p in props]
    if names[:3] != ["x", "y", "z"]:
        raise MalformedHeader(f"vertex properties must start with x y z, got {names}")
    has_label = len(names) == 4 and names[3] == "label"
    if len(names) > 3 and not has_label:
        raise MalformedHeader(f"unsupported vertex properties {names}")
    body = [ln for ln in lines[body_at:] if ln.strip()]
    if len(body) < n:
        raise SizeMismatch(f"PLY promises {n} vertices, found {len(body)}")
    pts = np.zeros((n, 3))
    labels = np.zeros(n, dtype=bool) if has_label else None
    for i in range(n):
        parts = body[i].split()
        if len(parts) != len(names):
            raise MalformedHeader(f"vertex row {i} has {len(parts)} fields")
        pts[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
        if has_label:
            labels[i] = int(parts[3]) != 0
    return PointCloud(pts, labels)


# -- named raw tensors ---------------------------------------------------------

_TENSOR_DTYPES = {"f8": "<f8", "f4": "<f4", "i8": "<i8"}


def write_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Tiny named-tensor container: ASCII header, raw LE payloads."""
    header = ["rten 1"]
    payloads = []
    for name, arr in tensors.items():
        if not name or any(c.isspace() for c in name):
            raise ValueError(f"bad tensor name {name!r}")
        a = np.asarray(arr)
        if a.dtype == np.float64:
            code = "f8"
        elif a.dtype == np.float32:
            code = "f4"
        elif a.dtype == np.int64:
            code = "i8"
        else:
            raise ValueError(f"unsupported tensor dtype {a.dtype}")
        dims = " ".join(str(d) for d in a.shape)
        header.append(f"tensor {name} {code} {a.ndim}" + (f" {dims}" if dims else ""))
        payloads.append(np.ascontiguousarray(a).astype(_TENSOR_DTYPES[code]).tobytes())
    header.append("end")
    _write_bytes(path, ("\n".join(header) + "\n").encode("ascii") + b"".join(payloads))


def read_tensors(path) -> dict[str, np.ndarray]:
    buf = _read_bytes(path)
    end = buf.find(b"end\n")
    if not buf.startswith(b"rten 1\n") or end < 0:
        raise MalformedHeader("not a tensor container")
    header = buf[:end].decode("ascii").splitlines()[1:]
    pos = end + 4
    out: dict[str, np.ndarray] = {}
    for line in header:
        parts = line.split()
        if len(parts) < 4 or parts[0] != "tensor":
            raise MalformedHeader(f"bad tensor line {line!r}")
        name, code, ndim = parts[1], parts[2], int(parts[3])
        if code not in _TENSOR_DTYPES:
            raise MalformedHeader(f"unknown dtype code {code!r}")
        if len(parts) != 4 + ndim:
            raise MalformedHeader(f"dimension count mismatch in {line!r}")
        shape = tuple(int(d) for d in parts[4:])
        count = int(np.prod(shape)) if shape else 1
        dt = np.dtype(_TENSOR_DTYPES[code])
        nbytes = count * dt.itemsize
        if len(buf) - pos < nbytes:
            raise SizeMismatch(f"tensor {name!r} payload truncated")
        out[name] = np.frombuffer(buf, dtype=dt, count=count, offset=pos).reshape(shape).copy()
        pos += nbytes
    return out


# -- deterministic JSON --------------------------------------------------------

def dumps_deterministic(obj, indent: int = 2) -> str:
    """JSON with sorted keys and %.17g floats; bytes are reproducible."""

    def emit(o, level: int) -> str:
        pad = " " * (indent * level)
        pad_in = " " * (indent * (level + 1))
        if o is None:
            return "null"
        if isinstance(o, bool):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            v = float(o)
            if not np.isfinite(v):
                raise ValueError("JSON floats must be finite")
            return format(v, ".17g")
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = sorted(o.items())
            rows = [f"{pad_in}{json.dumps(str(k))}: {emit(v, level + 1)}" for k, v in items]
            return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
        if isinstance(o, (list, tuple, np.ndarray)):
            seq = list(o)
            if not seq:
                return "[]"
            rows = [f"{pad_in}{emit(v, level + 1)}" for v in seq]
            return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return emit(obj, 0) + "\n"


def write_json(path, obj) -> None:
    _write_bytes(path, dumps_deterministic(obj).encode("ascii"))


def read_json(path):
    buf = _read_bytes(path)
    try:
        return json.loads(buf.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedHeader(f"bad JSON in {path}: {e}") from None


# -- dataset samples -----------------------------------------------------------

def intrinsics_to_dict(K: CameraIntrinsics) -> dict:
    return {
        "fx": K.fx,
        "fy": K.fy,
        "cx": K.cx,
        "cy": K.cy,
        "width": K.width,
        "height": K.height,
    }


def intrinsics_from_dict(d: dict) -> CameraIntrinsics:
    try:
        return CameraIntrinsics(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )
    except KeyError as e:
        raise MalformedHeader(f"calib is missing {e}") from None


@dataclass
class DatasetSample:
    """A rendered two-view pair with its ground truth, as stored on disk.

    Motion maps source to target; the plane is source-frame.  All maps
    live on the target grid; the flow is the stored residual parallax
    u = p - p^w.  The cloud is in the source (world) frame.
    """

    intrinsics: CameraIntrinsics
    motion: RigidMotion
    plane: PlaneParams
    seed: int
    label: str
    source: Image
    target: Image
    gamma: ScalarMap
    depth: ScalarMap
    height: ScalarMap
    flow: FlowField
    road: np.ndarray
    cloud: PointCloud


_SAMPLE_FILES = (
    "calib.json",
    "pair.json",
    "source.ppm",
    "target.ppm",
    "gt_gamma.pfm",
    "gt_gamma_mask.pgm",
    "gt_depth.pfm",
    "gt_depth_mask.pgm",
    "gt_height.pfm",
    "gt_height_mask.pgm",
    "gt_flow.pfm",
    "gt_flow_mask.pgm",
    "road_mask.pgm",
    "points.ply",
)


def write_sample(directory, sample: DatasetSample) -> None:
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create {d}: {e}") from e
    write_json(d / "calib.json", intrinsics_to_dict(sample.intrinsics))
    write_json(
        d / "pair.json",
        {
            "R": sample.motion.rotation.tolist(),
            "T": sample.motion.translation.tolist(),
            "N": sample.plane.normal.tolist(),
            "h_c": sample.plane.height,
            "seed": sample.seed,
            "label": sample.label,
        },
    )
    write_image(d / "source.ppm", sample.source)
    write_image(d / "target.ppm", sample.target)
    for name, m in (
        ("gamma", sample.gamma),
        ("depth", sample.depth),
        ("height", sample.height),
    ):
        write_pfm(d / f"gt_{name}.pfm", m.values)
        write_mask(d / f"gt_{name}_mask.pgm", m.valid)
    write_flow_pfm(d / "gt_flow.pfm", sample.flow.values)
    write_mask(d / "gt_flow_mask.pgm", sample.flow.valid)
    write_mask(d / "road_mask.pgm", sample.road)
    write_point_cloud(d / "points.ply", sample.cloud)


def read_sample(directory) -> DatasetSample:
    d = Path(directory)
    missing = [f for f in _SAMPLE_FILES if not (d / f).is_file()]
    if missing:
        raise MissingFile(f"{d} lacks {', '.join(missing)}")

    K = intrinsics_from_dict(read_json(d / "calib.json"))
    pair = read_json(d / "pair.json")
    try:
        motion = RigidMotion(np.array(pair["R"]), np.array(pair["T"]))
        plane = PlaneParams(np.array(pair["N"]), float(pair["h_c"]))
        seed = int(pair["seed"])
        label = str(pair["label"])
    except KeyError as e:
        raise MalformedHeader(f"pair.json is missing {e}") from None

    source = read_image(d / "source.ppm")
    target = read_image(d / "target.ppm")

    def scalar(name: str) -> ScalarMap:
        return ScalarMap(read_pfm(d / f"gt_{name}.pfm"), read_mask(d / f"gt_{name}_mask.pgm"))

    gamma = scalar("gamma")
    depth = scalar("depth")
    height = scalar("height")
    flow = FlowField(read_flow_pfm(d / "gt_flow.pfm"), read_mask(d / "gt_flow_mask.pgm"))
    road = read_mask(d / "road_mask.pgm")
    cloud = read_point_cloud(d / "points.ply")

    grid = (K.height, K.width)
    for name, shape in (
        ("source.ppm", source.shape),
        ("target.ppm", target.shape),
        ("gt_gamma.pfm", gamma.shape),
        ("gt_depth.pfm", depth.shape),
        ("gt_height.pfm", height.shape),
        ("gt_flow.pfm", flow.shape),
        ("road_mask.pgm", road.shape),
    ):
        if tuple(shape) != grid:
            raise IncongruentGrids(f"{name} is {shape}, calib promises {grid}")

    return DatasetSample(
        intrinsics=K,
        motion=motion,
        plane=plane,
        seed=seed,
        label=label,
        source=source,
        target=target,
        gamma=gamma,
        depth=depth,
        height=height,
        flow=flow,
        road=road,
        cloud=cloud,
    )


def sample_from_scene(scene) -> tuple[DatasetSample, "object"]:
    """Render a scene and pack it as an on-disk style sample.

    Returns (sample, ground_truth) so callers can also reach the parts
    that are not persisted (optical flow, per-view hits).
    """
    from .synth import ground_truth

    gt = ground_truth(scene)
    sample = DatasetSample(
        intrinsics=scene.intrinsics,
        motion=scene.motion,
        plane=scene.plane,
        seed=scene.seed,
        label=scene.label,
        source=gt.source.image,
        target=gt.target.image,
        gamma=gt.gamma,
        depth=gt.depth,
        height=gt.height,
        flow=gt.flow_res,
        road=gt.road,
        cloud=gt.cloud,
    )
    return sample, gt
