"""File formats: meshes, snapshot/basis binaries, CSVs and small key=value files.

Every writer goes through a temporary file in the destination directory
followed by ``os.replace`` so readers never observe partial files.
"""
from __future__ import annotations

import csv
import io as _io
import os
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import ContractError
from .mesh import GeometryDescriptor, Mesh

MAGIC = b"MROM1"
_FMT = "%.17g"


@contextmanager
def atomic_write(path, mode="w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        kw = {} if "b" in mode else {"newline": ""}
        with os.fdopen(fd, mode, **kw) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _g(v) -> str:
    return _FMT % v


# -- meshes -----------------------------------------------------------------

def write_mesh(path, m: Mesh):
    with atomic_write(path) as fh:
        fh.write(f"NODES {m.n_nodes}\n")
        for i, (x, y) in enumerate(m.nodes):
            fh.write(f"{i} {_g(x)} {_g(y)}\n")
        fh.write(f"TRIANGLES {m.n_triangles}\n")
        for i, t in enumerate(m.triangles):
            fh.write(f"{i} {t[0]} {t[1]} {t[2]}\n")
        fh.write(f"BOUNDARY {m.boundary_edges.shape[0]}\n")
        for (a, b), tag in zip(m.boundary_edges, m.boundary_tags):
            fh.write(f"{a} {b} {tag}\n")
        d = m.descriptor
        fh.write("DESCRIPTOR\n")
        fh.write(" ".join(_g(v) for v in (d.S_r, d.S_l, d.S_x, d.L, d.D, m.h)) + "\n")


def read_mesh(path) -> Mesh:
    lines = Path(path).read_text().splitlines()
    pos = 0

    def header(name):
        nonlocal pos
        parts = lines[pos].split()
        if not parts or parts[0] != name:
            raise ContractError(f"{path}: expected section {name} at line {pos + 1}")
        pos += 1
        return int(parts[1]) if len(parts) > 1 else None

    def block(count):
        nonlocal pos
        rows = [lines[pos + k].split() for k in range(count)]
        pos += count
        return rows

    n = header("NODES")
    nodes = np.array([[float(r[1]), float(r[2])] for r in block(n)])
    t = header("TRIANGLES")
    tris = np.array([[int(v) for v in r[1:4]] for r in block(t)], dtype=np.int64)
    k = header("BOUNDARY")
    rows = block(k)
    edges = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2)
    tags = np.array([r[2] for r in rows])
    header("DESCRIPTOR")
    vals = [float(v) for v in lines[pos].split()]
    g = GeometryDescriptor(*vals[:5])
    return Mesh(nodes, tris, edges, tags, g, vals[5])


# -- MROM1 binaries ---------------------------------------------------------

def write_matrix(path, rows, footer: str | None = None):
    """Write rows (``n_fields x dof_len``) in the MROM1 binary layout."""
    A = np.ascontiguousarray(np.atleast_2d(rows), dtype="<f8")
    with atomic_write(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", A.shape[0], A.shape[1]))
        fh.write(A.tobytes())
        if footer is not None:
            fh.write(footer.encode() + b"\n")


def read_matrix(path):
    """Return ``(rows, footer)``; ``footer`` is ``None`` when absent."""
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise ContractError(f"{path}: not an MROM1 file")
    nf, dl = struct.unpack("<II", data[5:13])
    end = 13 + 8 * nf * dl
    if len(data) < end:
        raise ContractError(f"{path}: truncated payload")
    rows = np.frombuffer(data[13:end], dtype="<f8").reshape(nf, dl).astype(float)
    tail = data[end:].decode().strip()
    return rows, (tail or None)


def write_snapshots(path, snapshots):
    write_matrix(path, snapshots)


def read_snapshots(path) -> np.ndarray:
    return read_matrix(path)[0]


def write_basis(path, basis_columns, singular_values):
    """Basis vectors as rows plus a footer line with the singular values."""
    footer = "SV " + " ".join(_g(s) for s in np.asarray(singular_values).ravel())
    write_matrix(path, np.asarray(basis_columns).T, footer)


def read_basis(path):
    """Return ``(basis (ndof, n), singular_values)``."""
    rows, footer = read_matrix(path)
    sv = np.array([])
    if footer and footer.startswith("SV"):
        sv = np.array([float(v) for v in footer.split()[1:]])
    return rows.T.copy(), sv


# -- CSV ---------------------------------------------------------------------

def write_measurements(path, values, ids=None):
    values = np.asarray(values, dtype=float).ravel()
    ids = np.arange(values.size) if ids is None else np.asarray(ids)
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["voxel_id", "value"])
        for i, v in zip(ids, values):
            w.writerow([int(i), _g(v)])


def read_measurements(path):
    """Return ``(ids, values)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] == ["voxel_id", "value"]:
        rows = rows[1:]
    ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    vals = np.array([float(r[1]) for r in rows])
    return ids, vals


def write_csv(path, header, rows):
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for r in rows:
            w.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in r])


def write_square(path, D):
    D = np.asarray(D, dtype=float)
    write_csv(path, None, [list(map(float, r)) for r in D])


def read_square(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in r] for r in csv.reader(fh) if r])


# -- key = value files -------------------------------------------------------

def write_keyvalue(path, items: dict):
    with atomic_write(path) as fh:
        for k, v in items.items():
            fh.write(f"{k} = {v}\n")


def read_keyvalue(path) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"{path}: malformed line {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


_GEOM_KEYS = ("S_r", "S_l", "S_x", "L", "D")


def write_geometry(path, g: GeometryDescriptor):
    write_keyvalue(path, {k: _g(getattr(g, k)) for k in _GEOM_KEYS})


def read_geometry(path) -> GeometryDescriptor:
    kv = read_keyvalue(path)
    unknown = set(kv) - set(_GEOM_KEYS)
    if unknown:
        raise ContractError(f"{path}: unknown geometry keys {sorted(unknown)}")
    return GeometryDescriptor(**{k: float(v) for k, v in kv.items()})


def parse_pair(text):
    a, b = (float(v) for v in str(text).split(","))
    return a, b


def write_wspace(path, voxel: float, beam, band=None):
    items = {"voxel": _g(voxel), "beam": f"{_g(beam[0])},{_g(beam[1])}"}
    if band is not None:
        items["band"] = f"{_g(band[0])},{_g(band[1])}"
    write_keyvalue(path, items)


def read_wspace(path) -> dict:
    kv = read_keyvalue(path)
    unknown = set(kv) - {"voxel", "beam", "band"}
    if unknown:
        raise ContractError(f"{path}: unknown observation keys {sorted(unknown)}")
    out = {"s": float(kv.get("voxel", 0.25)),
           "beam": parse_pair(kv.get("beam", "0.7071067811865476,0.7071067811865476"))}
    if "band" in kv:
        out["band"] = parse_pair(kv["band"])
    return out


def dumps_array(a) -> str:
    buf = _io.StringIO()
    np.savetxt(buf, np.atleast_2d(a), fmt=_FMT)
    return buf.getvalue()


def write_embedding(path, model):
    """Embedding text file; ``W_map`` goes to ``<path>.W.bin`` (MROM1)."""
    path = Path(path)
    wpath = path.with_name(path.name + ".W.bin")
    write_matrix(wpath, model.W_map.T)
    g = model.grid
    with atomic_write(path) as fh:
        fh.write(f"p {model.p}\n")
        fh.write(f"q {model.q}\n")
        fh.write("grid " + " ".join([_g(g.origin[0]), _g(g.origin[1]), _g(g.spacing),
                                     str(g.counts[0]), str(g.counts[1])]) + "\n")
        fh.write("eigenvalues " + " ".join(_g(v) for v in model.eigenvalues) + "\n")
        fh.write(f"X {model.X.shape[0]} {model.X.shape[1]}\n")
        fh.write(dumps_array(model.X))
        fh.write(f"TEMPLATES {len(model.registry)}\n")
        for name, d in model.registry:
            fh.write(name + " " + " ".join(_g(v) for v in d.as_tuple()) + "\n")
        fh.write(f"W_map {wpath.name}\n")


def read_embedding(path):
    from .morpho import EmbeddingModel, GridSpec

    path = Path(path)
    lines = path.read_text().splitlines()
    it = iter(lines)
    p = int(next(it).split()[1])
    q = int(next(it).split()[1])
    gp = next(it).split()[1:]
    grid = GridSpec((float(gp[0]), float(gp[1])), float(gp[2]), (int(gp[3]), int(gp[4])))
    eig = np.array([float(v) for v in next(it).split()[1:]])
    _, r, c = next(it).split()
    X = np.array([[float(v) for v in next(it).split()] for _ in range(int(r))]).reshape(
        int(r), int(c))
    k = int(next(it).split()[1])
    registry = []
    for _ in range(k):
        parts = next(it).split()
        registry.append((parts[0], GeometryDescriptor(*map(float, parts[1:6]))))
    wname = next(it).split()[1]
    W = read_matrix(path.with_name(wname))[0].T.copy()
    return EmbeddingModel(p, X, W, eig, grid, registry, q)
