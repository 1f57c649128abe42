"""Reading and writing OBJ, OFF, ASCII PLY meshes and XYZ/PLY point clouds."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError, UnsupportedFormat
from .mesh_core import PointCloud, TriangleMesh

MESH_FORMATS = ("obj", "off", "ply")
POINT_FORMATS = ("xyz", "ply")


def _infer_format(path, fmt, allowed):
    if fmt is None:
        fmt = Path(path).suffix.lstrip(".")
    fmt = fmt.lower()
    if fmt not in allowed:
        raise UnsupportedFormat(f"unsupported format {fmt!r} for {path}; expected one of {allowed}")
    return fmt


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _build_mesh(path, vertices, faces, face_lines):
    n = len(vertices)
    for tri, line in zip(faces, face_lines):
        for idx in tri:
            if idx < 0 or idx >= n:
                raise ParseError(f"face index {idx} out of range for {n} vertices", path, line)
        if len(set(tri)) < 3:
            raise ParseError(f"face {tri} repeats a vertex index", path, line)
    return TriangleMesh(np.array(vertices, dtype=float).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 3))


def _floats(tokens, path, lineno, count=3):
    try:
        vals = [float(t) for t in tokens[:count]]
    except ValueError:
        raise ParseError(f"expected {count} numbers, got {' '.join(tokens)!r}", path, lineno) from None
    if len(vals) < count:
        raise ParseError(f"expected {count} numbers, got {len(vals)}", path, lineno)
    return vals


def _read_obj(path, text):
    vertices, faces, face_lines = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        if tokens[0] == "v":
            vertices.append(_floats(tokens[1:], path, lineno))
        elif tokens[0] == "f":
            poly = []
            for tok in tokens[1:]:
                head = tok.split("/", 1)[0]
                try:
                    idx = int(head)
                except ValueError:
                    raise ParseError(f"bad face index {tok!r}", path, lineno) from None
                if idx == 0:
                    raise ParseError("OBJ indices are 1-based; got 0", path, lineno)
                poly.append(idx - 1 if idx > 0 else len(vertices) + idx)
            if len(poly) < 3:
                raise ParseError("face with fewer than 3 vertices", path, lineno)
            for tri in _fan(poly):
                faces.append(tri)
                face_lines.append(lineno)
    return _build_mesh(path, vertices, faces, face_lines)


def _data_lines(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            yield lineno, tokens


def _read_off(path, text):
    lines = _data_lines(text)
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise ParseError("empty file", path, 1) from None
    if not tokens[0].upper().endswith("OFF"):
        raise ParseError(f"missing OFF header, got {tokens[0]!r}", path, lineno)
    counts = tokens[1:]
    if not counts:
        try:
            lineno, counts = next(lines)
        except StopIteration:
            raise ParseError("missing counts line", path, lineno) from None
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (ValueError, IndexError):
        raise ParseError(f"bad counts line {' '.join(counts)!r}", path, lineno) from None

    vertices, faces, face_lines = [], [], []
    for _ in range(nv):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nv} vertices, file ended after {len(vertices)}", path, lineno) from None
        vertices.append(_floats(tokens, path, lineno))
    for _ in range(nf):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nf} faces, file ended early", path, lineno) from None
        try:
            arity = int(tokens[0])
            poly = [int(t) for t in tokens[1:1 + arity]]
        except ValueError:
            raise ParseError(f"bad face line {' '.join(tokens)!r}", path, lineno) from None
        if arity < 3 or len(poly) != arity:
            raise ParseError(f"face declares {arity} vertices but lists {len(poly)}", path, lineno)
        for tri in _fan(poly):
            faces.append(tri)
            face_lines.append(lineno)
    return _build_mesh(path, vertices, faces, face_lines)


def _read_ply(path, text):
    """Parse ASCII PLY; returns ``(vertices, faces, face_lines)``."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", path, 1)
    elements = []
    body_start = None
    for i, raw in enumerate(lines[1:], 2):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise UnsupportedFormat(f"{path}: only ASCII PLY is supported, got {' '.join(tokens[1:])}")
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", path, i)
            elements.append({"name": tokens[1], "count": int(tokens[2]), "props": []})
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before any element", path, i)
            if tokens[1] == "list":
                elements[-1]["props"].append(("list", tokens[-1]))
            else:
                elements[-1]["props"].append(("scalar", tokens[-1]))
        elif tokens[0] == "end_header":
            body_start = i
            break
        else:
            raise ParseError(f"unknown header keyword {tokens[0]!r}", path, i)
    if body_start is None:
        raise ParseError("missing end_header", path, len(lines))

    vertices, faces, face_lines = [], [], []
    lineno = body_start
    for elem in elements:
        names = [name for _, name in elem["props"]]
        for _ in range(elem["count"]):
            lineno += 1
            while lineno <= len(lines) and not lines[lineno - 1].strip():
                lineno += 1
            if lineno > len(lines):
                raise ParseError(f"file ended inside element {elem['name']!r}", path, lineno)
            tokens = lines[lineno - 1].split()
            if elem["name"] == "vertex":
                try:
                    xyz = [float(tokens[names.index(c)]) for c in "xyz"]
                except (ValueError, IndexError):
                    raise ParseError("bad vertex line", path, lineno) from None
                vertices.append(xyz)
            elif elem["name"] == "face":
                try:
                    arity = int(tokens[0])
                    poly = [int(t) for t in tokens[1:1 + arity]]
                except (ValueError, IndexError):
                    raise ParseError("bad face line", path, lineno) from None
                if arity < 3 or len(poly) != arity:
                    raise ParseError(f"face declares {arity} vertices but lists {len(poly)}", path, lineno)
                for tri in _fan(poly):
                    faces.append(tri)
                    face_lines.append(lineno)
    return vertices, faces, face_lines


def load_mesh(path, format=None):
    """Load a triangle mesh; polygons are fan-triangulated, vertex order kept."""
    fmt = _infer_format(path, format, MESH_FORMATS)
    text = Path(path).read_text()
    if fmt == "obj":
        return _read_obj(path, text)
    if fmt == "off":
        return _read_off(path, text)
    return _build_mesh(path, *_read_ply(path, text))


def save_mesh(mesh, path, format=None):
    fmt = _infer_format(path, format, MESH_FORMATS)
    v = [" ".join(f"{c:.17g}" for c in row) for row in mesh.vertices]
    if fmt == "obj":
        body = [f"v {row}" for row in v] + [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    elif fmt == "off":
        body = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"] + v + [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    else:
        body = [
            "ply", "format ascii 1.0",
            f"element vertex {mesh.n_vertices}",
            "property double x", "property double y", "property double z",
            f"element face {mesh.n_faces}",
            "property list uchar int vertex_indices",
            "end_header",
        ] + v + [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(body) + "\n")


def _format_points(points):
    return [f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in points]


def save_points(cloud, path, format=None):
    """Write a point cloud as XYZ (one ``x y z`` per line) or ASCII PLY."""
    fmt = _infer_format(path, format, POINT_FORMATS)
    rows = _format_points(np.asarray(cloud))
    if fmt == "ply":
        rows = [
            "ply", "format ascii 1.0",
            f"element vertex {len(rows)}",
            "property float x", "property float y", "property float z",
            "end_header",
        ] + rows
    Path(path).write_text("".join(r + "\n" for r in rows))


def load_points(path, format=None):
    fmt = _infer_format(path, format, POINT_FORMATS)
    text = Path(path).read_text()
    if fmt == "ply":
        vertices, _, _ = _read_ply(path, text)
        return PointCloud(np.array(vertices, dtype=float).reshape(-1, 3))
    pts = []
    for lineno, tokens in _data_lines(text):
        pts.append(_floats(tokens, path, lineno))
    return PointCloud(np.array(pts, dtype=float).reshape(-1, 3))
