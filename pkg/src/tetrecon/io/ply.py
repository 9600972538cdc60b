"""PLY 1.0 reader and writer (ascii and binary_little_endian).

Vertices carry x, y, z and optionally an integer ``camera_id``; faces are
lists of three vertex indices.  Other scalar vertex properties are read and
ignored.  Elements other than ``vertex`` and ``face`` are rejected.
"""

from dataclasses import dataclass

import numpy as np

from ..trimesh import TriMesh

_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}
_FORMATS = ("ascii", "binary_little_endian")


class ParseError(ValueError):
    """Malformed PLY; ``line`` (1-based) or byte ``offset`` points at the defect."""

    def __init__(self, msg, line=None, offset=None):
        where = f" (line {line})" if line is not None else f" (byte {offset})" if offset is not None else ""
        super().__init__(msg + where)
        self.line = line
        self.offset = offset


class UnsupportedElement(ParseError):
    pass


@dataclass
class PlyData:
    vertices: np.ndarray            # (n, 3) float64
    faces: np.ndarray = None        # (m, 3) int64 or None
    camera_id: np.ndarray = None    # (n,) int64 or None


@dataclass
class _Element:
    name: str
    count: int
    props: list                     # (name, dtype) scalars or (name, count dtype, item dtype) lists
    line: int


def _parse_header(f):
    magic = f.readline()
    if magic.rstrip(b"\r\n") != b"ply":
        raise ParseError("missing 'ply' magic", line=1)
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = f.readline()
        lineno += 1
        if not raw:
            raise ParseError("missing end_header", line=lineno)
        try:
            words = raw.decode("ascii").split()
        except UnicodeDecodeError:
            raise ParseError("non-ascii header line", line=lineno) from None
        if not words:
            continue
        key = words[0]
        if key == "end_header":
            break
        if key in ("comment", "obj_info"):
            continue
        if key == "format":
            if len(words) != 3 or words[2] != "1.0":
                raise ParseError("bad format line", line=lineno)
            if words[1] not in _FORMATS:
                raise ParseError(f"unsupported format {words[1]!r}", line=lineno)
            fmt = words[1]
        elif key == "element":
            if len(words) != 3 or not words[2].isdigit():
                raise ParseError("bad element line", line=lineno)
            if words[1] not in ("vertex", "face"):
                raise UnsupportedElement(f"element {words[1]!r} is not supported", line=lineno)
            elements.append(_Element(words[1], int(words[2]), [], lineno))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            if len(words) == 5 and words[1] == "list":
                if words[2] not in _TYPES or words[3] not in _TYPES:
                    raise ParseError("unknown list property type", line=lineno)
                elements[-1].props.append((words[4], _TYPES[words[2]], _TYPES[words[3]]))
            elif len(words) == 3 and words[1] in _TYPES:
                elements[-1].props.append((words[2], _TYPES[words[1]]))
            else:
                raise ParseError("bad property line", line=lineno)
        else:
            raise ParseError(f"unknown header keyword {key!r}", line=lineno)
    if fmt is None:
        raise ParseError("missing format line", line=lineno)
    return fmt, elements, lineno


def _check_elements(elements):
    names = [e.name for e in elements]
    if "vertex" not in names:
        raise ParseError("no vertex element")
    if len(set(names)) != len(names):
        raise ParseError("duplicate element")
    for e in elements:
        pn = [p[0] for p in e.props]
        if e.name == "vertex":
            for c in "xyz":
                if c not in pn:
                    raise ParseError(f"vertex element lacks property {c}", line=e.line)
            for p in e.props:
                if len(p) == 3:
                    raise UnsupportedElement("list property on vertices", line=e.line)
                if p[0] in "xyz" and p[1] not in ("f4", "f8"):
                    raise ParseError(f"coordinate {p[0]} must be float or double", line=e.line)
                if p[0] == "camera_id" and p[1][0] not in "iu":
                    raise ParseError("camera_id must be an integer property", line=e.line)
        else:
            lists = [p for p in e.props if len(p) == 3]
            if len(lists) != 1 or lists[0][0] not in ("vertex_indices", "vertex_index"):
                raise UnsupportedElement("face element needs one vertex_indices list", line=e.line)


def _vertex_result(table, names):
    xyz = np.stack([np.asarray(table[c], dtype=np.float64) for c in "xyz"], axis=1)
    cam = np.asarray(table["camera_id"], dtype=np.int64) if "camera_id" in names else None
    return xyz, cam


def _read_binary(f, elements, header_end):
    vertices = faces = cam = None
    for e in elements:
        start = f.tell()
        if e.name == "vertex":
            dt = np.dtype([(p[0], "<" + p[1]) for p in e.props])
            buf = f.read(dt.itemsize * e.count)
            if len(buf) != dt.itemsize * e.count:
                raise ParseError("truncated vertex data", offset=start + len(buf))
            table = np.frombuffer(buf, dtype=dt)
            vertices, cam = _vertex_result(table, [p[0] for p in e.props])
        else:
            # assume three indices per face, then verify every count
            fields = []
            for p in e.props:
                if len(p) == 3:
                    fields += [("n", "<" + p[1]), ("idx", "<" + p[2], (3,))]
                else:
                    fields.append((p[0], "<" + p[1]))
            dt = np.dtype(fields)
            buf = f.read(dt.itemsize * e.count)
            table = np.frombuffer(buf[: len(buf) - len(buf) % dt.itemsize], dtype=dt)
            bad = np.nonzero(table["n"] != 3)[0]
            if len(bad):
                raise ParseError("only triangular faces are supported",
                                 offset=start + int(bad[0]) * dt.itemsize)
            if len(buf) != dt.itemsize * e.count:
                raise ParseError("truncated face data", offset=start + len(buf))
            faces = table["idx"].astype(np.int64)
    if f.read(1):
        raise ParseError("trailing bytes after the last element", offset=f.tell() - 1)
    return vertices, faces, cam


def _read_ascii(f, elements, header_end):
    lines = f.read().decode("ascii", errors="replace").splitlines()
    pos = 0
    lineno = header_end
    vertices = faces = cam = None

    def next_row():
        nonlocal pos, lineno
        while pos < len(lines):
            words = lines[pos].split()
            pos += 1
            lineno += 1
            if words and words[0] != "comment":
                return words
        raise ParseError("unexpected end of file", line=lineno + 1)

    for e in elements:
        if e.name == "vertex":
            k = len(e.props)
            rows = np.empty((e.count, k))
            for i in range(e.count):
                w = next_row()
                if len(w) != k:
                    raise ParseError(f"expected {k} vertex values, got {len(w)}", line=lineno)
                try:
                    rows[i] = [float(x) for x in w]
                except ValueError:
                    raise ParseError("non-numeric vertex value", line=lineno) from None
            names = [p[0] for p in e.props]
            table = {n: rows[:, j] for j, n in enumerate(names)}
            for j, p in enumerate(e.props):
                if p[1] == "f4":
                    rows[:, j] = rows[:, j].astype(np.float32)
                if p[1][0] in "iu" and not np.all(rows[:, j] == np.round(rows[:, j])):
                    raise ParseError(f"non-integer value for {p[0]}")
            vertices, cam = _vertex_result(table, names)
        else:
            faces = np.empty((e.count, 3), dtype=np.int64)
            for i in range(e.count):
                w = next_row()
                col = 0
                for p in e.props:
                    if col >= len(w):
                        raise ParseError("wrong number of face values", line=lineno)
                    if len(p) == 3:
                        if w[col] != "3" or col + 4 > len(w):
                            raise ParseError("only triangular faces are supported", line=lineno)
                        try:
                            faces[i] = [int(x) for x in w[col + 1: col + 4]]
                        except ValueError:
                            raise ParseError("bad face indices", line=lineno) from None
                        col += 4
                    else:
                        col += 1
                if col != len(w):
                    raise ParseError("wrong number of face values", line=lineno)
    return vertices, faces, cam


def read_ply(path):
    with open(path, "rb") as f:
        fmt, elements, header_end = _parse_header(f)
        _check_elements(elements)
        reader = _read_ascii if fmt == "ascii" else _read_binary
        vertices, faces, cam = reader(f, elements, header_end)
    n = len(vertices)
    if faces is not None and len(faces) and (faces.min() < 0 or faces.max() >= n):
        raise ParseError("face index out of range")
    return PlyData(vertices, faces, cam)


def write_ply(path, vertices, faces=None, camera_id=None, format="binary_little_endian",
              dtype="double"):
    """Write points or a triangle mesh; doubles round-trip bit-exactly in binary mode."""
    if format not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}")
    if dtype not in ("float", "double"):
        raise ValueError("dtype must be 'float' or 'double'")
    V = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    ft = "<f8" if dtype == "double" else "<f4"
    head = ["ply", f"format {format} 1.0", f"element vertex {len(V)}",
            f"property {dtype} x", f"property {dtype} y", f"property {dtype} z"]
    fields = [("x", ft), ("y", ft), ("z", ft)]
    if camera_id is not None:
        camera_id = np.asarray(camera_id, dtype=np.int64).ravel()
        if len(camera_id) != len(V):
            raise ValueError("camera_id length differs from the vertex count")
        head.append("property int camera_id")
        fields.append(("camera_id", "<i4"))
    if faces is not None:
        F = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        head += [f"element face {len(F)}", "property list uchar int vertex_indices"]
    head.append("end_header")
    table = np.empty(len(V), dtype=fields)
    table["x"], table["y"], table["z"] = V[:, 0], V[:, 1], V[:, 2]
    if camera_id is not None:
        table["camera_id"] = camera_id
    with open(path, "wb") as f:
        f.write(("\n".join(head) + "\n").encode("ascii"))
        if format == "binary_little_endian":
            f.write(table.tobytes())
            if faces is not None:
                ft3 = np.empty(len(F), dtype=[("n", "u1"), ("idx", "<i4", (3,))])
                ft3["n"] = 3
                ft3["idx"] = F
                f.write(ft3.tobytes())
        else:
            cfmt = "%.17g" if dtype == "double" else "%.9g"
            out = []
            for i in range(len(V)):
                row = " ".join(cfmt % c for c in V[i])
                if camera_id is not None:
                    row += " %d" % camera_id[i]
                out.append(row)
            if faces is not None:
                out += ["3 %d %d %d" % tuple(t) for t in F]
            f.write(("\n".join(out) + ("\n" if out else "")).encode("ascii"))


def read_mesh(path):
    d = read_ply(path)
    return TriMesh(d.vertices, d.faces if d.faces is not None else np.zeros((0, 3), dtype=np.int64))


def write_mesh(path, mesh, format="binary_little_endian"):
    write_ply(path, mesh.vertices, mesh.faces, format=format)
