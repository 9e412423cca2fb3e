"""OBJ and PLY readers/writers for meshes and point clouds.

PLY support covers ascii and binary_little_endian, vertex properties
(x, y, z plus optional scalars such as an integer "segment" id or a
float "c2c_dist"), and triangle/polygon faces.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import MissingFileError, ParseError

_PLY_TYPES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def _require(path):
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(f"file not found: {p}")
    return p


def load_obj(path):
    """Read an OBJ file. Returns (vertices (N,3), faces list of index tuples)."""
    p = _require(path)
    vertices = []
    faces = []
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "v":
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif tag == "f":
                # vertex indices may carry /vt/vn suffixes; 1-based, negatives allowed
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                faces.append(tuple(idx))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{p}:{lineno}: bad OBJ line: {raw!r}", line=lineno) from exc
    return np.asarray(vertices, dtype=float).reshape(-1, 3), faces


def save_obj(path, vertices, triangles):
    lines = [f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}" for v in np.asarray(vertices)]
    lines += [f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}" for t in np.asarray(triangles)]
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_ply_header(fh, path):
    def next_line():
        line = fh.readline()
        if not line:
            raise ParseError(f"{path}: unexpected end of PLY header")
        return line.decode("ascii", errors="replace").strip()

    if next_line() != "ply":
        raise ParseError(f"{path}: not a PLY file", line=1)
    fmt = None
    elements = []  # list of (name, count, [(prop_name, type) or (prop_name, 'list', count_t, item_t)])
    while True:
        line = next_line()
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] == "comment" or parts[0] == "obj_info":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before element in header")
            if parts[1] == "list":
                elements[-1][2].append((parts[4], "list", parts[2], parts[3]))
            else:
                elements[-1][2].append((parts[2], parts[1]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"{path}: unsupported PLY format {fmt!r}")
    return fmt, elements


def load_ply(path):
    """Read a PLY file.

    Returns a dict with "vertices" (N,3), "faces" (list of index tuples,
    may be empty) and "vertex_props" mapping extra property names to arrays.
    """
    p = _require(path)
    with open(p, "rb") as fh:
        fmt, elements = _parse_ply_header(fh, p)
        data = {}
        if fmt == "ascii":
            tokens = fh.read().decode("ascii").split()
            pos = 0
            for name, count, props in elements:
                rows = []
                for _ in range(count):
                    row = []
                    for prop in props:
                        if prop[1] == "list":
                            n = int(float(tokens[pos])); pos += 1
                            row.append([float(tokens[pos + k]) for k in range(n)])
                            pos += n
                        else:
                            row.append(float(tokens[pos])); pos += 1
                    rows.append(row)
                data[name] = (props, rows)
        else:
            for name, count, props in elements:
                rows = []
                fixed = all(prop[1] != "list" for prop in props)
                if fixed:
                    fmt_str = "<" + "".join(_PLY_TYPES[prop[1]][0] for prop in props)
                    size = struct.calcsize(fmt_str)
                    raw = fh.read(size * count)
                    if len(raw) != size * count:
                        raise ParseError(f"{p}: truncated PLY body")
                    rows = [list(rec) for rec in struct.iter_unpack(fmt_str, raw)]
                else:
                    for _ in range(count):
                        row = []
                        for prop in props:
                            if prop[1] == "list":
                                cfmt, csize = _PLY_TYPES[prop[2]]
                                ifmt, isize = _PLY_TYPES[prop[3]]
                                n = struct.unpack("<" + cfmt, fh.read(csize))[0]
                                row.append(list(struct.unpack(f"<{n}{ifmt}", fh.read(isize * n))))
                            else:
                                sfmt, ssize = _PLY_TYPES[prop[1]]
                                row.append(struct.unpack("<" + sfmt, fh.read(ssize))[0])
                        rows.append(row)
                data[name] = (props, rows)

    out = {"vertices": np.zeros((0, 3)), "faces": [], "vertex_props": {}}
    if "vertex" in data:
        props, rows = data["vertex"]
        names = [prop[0] for prop in props]
        for axis in ("x", "y", "z"):
            if axis not in names:
                raise ParseError(f"{p}: vertex element missing property {axis!r}")
        arr = np.asarray(rows, dtype=float)
        cols = {nm: arr[:, i] for i, nm in enumerate(names)}
        out["vertices"] = np.column_stack([cols["x"], cols["y"], cols["z"]])
        for nm in names:
            if nm not in ("x", "y", "z"):
                kind = dict((prop[0], prop[1]) for prop in props)[nm]
                if kind in ("float", "float32", "double", "float64"):
                    out["vertex_props"][nm] = cols[nm]
                else:
                    out["vertex_props"][nm] = cols[nm].astype(np.int64)
    if "face" in data:
        props, rows = data["face"]
        list_col = next((i for i, prop in enumerate(props) if prop[1] == "list"), None)
        if list_col is None:
            raise ParseError(f"{p}: face element has no index list property")
        out["faces"] = [tuple(int(v) for v in row[list_col]) for row in rows]
    return out


def save_ply(path, vertices, triangles=None, vertex_props=None, binary=False):
    """Write a PLY mesh or point cloud (triangles=None)."""
    vertices = np.asarray(vertices, dtype=float)
    vertex_props = vertex_props or {}
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {len(vertices)}",
              "property double x", "property double y", "property double z"]
    prop_items = []
    for name, values in vertex_props.items():
        values = np.asarray(values)
        if np.issubdtype(values.dtype, np.integer):
            header.append(f"property int {name}")
            prop_items.append((values.astype(np.int32), "i"))
        else:
            header.append(f"property double {name}")
            prop_items.append((values.astype(float), "d"))
    if triangles is not None:
        header.append(f"element face {len(triangles)}")
        header.append("property list uchar int vertex_indices")
    header.append("end_header")

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            for i, v in enumerate(vertices):
                fh.write(struct.pack("<3d", *v))
                for values, code in prop_items:
                    fh.write(struct.pack("<" + code, values[i]))
            if triangles is not None:
                for t in np.asarray(triangles):
                    fh.write(struct.pack("<B3i", 3, int(t[0]), int(t[1]), int(t[2])))
        else:
            lines = []
            for i, v in enumerate(vertices):
                row = [f"{v[0]:.17g}", f"{v[1]:.17g}", f"{v[2]:.17g}"]
                for values, code in prop_items:
                    row.append(str(values[i]) if code == "i" else f"{values[i]:.17g}")
                lines.append(" ".join(row))
            if triangles is not None:
                for t in np.asarray(triangles):
                    lines.append(f"3 {int(t[0])} {int(t[1])} {int(t[2])}")
            fh.write(("\n".join(lines) + "\n").encode("ascii"))
