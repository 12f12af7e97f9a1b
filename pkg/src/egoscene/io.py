"""File formats: volume container, ASCII PLY, PGM depth/mask, pose JSON.

Volume container layout (all little-endian)::

    magic    4 bytes  b"EGVX"
    version  uint8    1
    dtype    uint8    code from _DTYPES
    ndim     uint8
    pad      uint8    0
    dims     ndim x uint32
    payload  C-order raw values
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

MAGIC = b"EGVX"
_VERSION = 1
_DTYPES = {
    1: np.dtype("<u1"),
    2: np.dtype("<f4"),
    3: np.dtype("<f8"),
    4: np.dtype("<i4"),
}
_CODES = {v: k for k, v in _DTYPES.items()}


def write_volume(path, array) -> None:
    arr = np.asarray(array)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    dt = arr.dtype.newbyteorder("<")
    if dt not in _CODES:
        raise TypeError(f"unsupported dtype {arr.dtype}")
    header = MAGIC + struct.pack("<BBBB", _VERSION, _CODES[dt], arr.ndim, 0)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def read_volume(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != MAGIC:
        raise ParseError(f"{path}: not a volume container")
    version, code, ndim, _ = struct.unpack_from("<BBBB", data, 4)
    if version != _VERSION or code not in _DTYPES:
        raise ParseError(f"{path}: unsupported version/dtype ({version}, {code})")
    dims = struct.unpack_from(f"<{ndim}I", data, 8)
    dt = _DTYPES[code]
    offset = 8 + 4 * ndim
    expected = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
    if len(data) - offset != expected:
        raise ParseError(f"{path}: payload has {len(data) - offset} bytes, expected {expected}")
    return np.frombuffer(data, dtype=dt, offset=offset).reshape(dims).copy()


# -- PLY -----------------------------------------------------------------

def write_ply(path, points) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    body = "\n".join(f"{x!r} {y!r} {z!r}" for x, y, z in pts.tolist())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        if len(pts):
            fh.write(body + "\n")


def read_ply(path) -> np.ndarray:
    """Read vertex x/y/z from an ASCII PLY file (other properties ignored)."""
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise ParseError(f"{path}: missing ply magic")
        count = None
        props = []
        in_vertex = False
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise ParseError(f"{path}: only ASCII PLY is supported")
            if tok[0] == "element":
                in_vertex = tok[1] == "vertex"
                if in_vertex:
                    count = int(tok[2])
            elif tok[0] == "property" and in_vertex:
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if count is None or not {"x", "y", "z"} <= set(props):
            raise ParseError(f"{path}: no vertex element with x/y/z")
        rows = [fh.readline().split() for _ in range(count)]
    try:
        table = np.array(rows, dtype=np.float64).reshape(count, len(props))
    except ValueError as exc:
        raise ParseError(f"{path}: malformed vertex data") from exc
    cols = [props.index(c) for c in ("x", "y", "z")]
    return table[:, cols]


# -- PGM -----------------------------------------------------------------

def write_pgm(path, image, maxval) -> None:
    img = np.asarray(image)
    h, w = img.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dt = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(img, dtype=dt).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1
    if fields[0] != b"P5":
        raise ParseError(f"{path}: only binary PGM (P5) is supported")
    w, h, maxval = (int(f) for f in fields[1:])
    dt = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    raw = np.frombuffer(data, dtype=dt, count=w * h, offset=pos)
    return raw.reshape(h, w).astype(np.int64)


# -- poses ---------------------------------------------------------------

def pose_to_json(pose) -> list:
    return [
        {"joint_name": name, "xyz_m": [float(v) for v in xyz]}
        for name, xyz in zip(pose.names, pose.joints)
    ]


def write_pose(path, pose) -> None:
    Path(path).write_text(json.dumps(pose_to_json(pose), indent=2) + "\n")


def read_pose(path):
    from .pose import Pose

    try:
        doc = json.loads(Path(path).read_text())
        names = tuple(item["joint_name"] for item in doc)
        joints = np.array([item["xyz_m"] for item in doc], dtype=np.float64)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed pose file: {exc}") from exc
    return Pose(joints, names)


def read_detections(path):
    """Detections JSON: list of ``{joint_name, uv_px, confidence}``."""
    try:
        doc = json.loads(Path(path).read_text())
        uv = np.array([item["uv_px"] for item in doc], dtype=np.float64).reshape(-1, 2)
        conf = np.array([item.get("confidence", 1.0) for item in doc], dtype=np.float64)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed detections file: {exc}") from exc
    return uv, conf


def write_detections(path, uv, confidence, names) -> None:
    doc = [
        {"joint_name": n, "uv_px": [float(a), float(b)], "confidence": float(c)}
        for n, (a, b), c in zip(names, np.asarray(uv), np.asarray(confidence))
    ]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
