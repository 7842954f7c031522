"""Triangulated 3D surface meshes with half-edge connectivity.

A :class:`TriSurfaceMesh` is immutable once constructed: all arrays are
frozen, so instances are safe to share across threads.  Construction
validates manifoldness and orientation consistency; loaders clean the
raw input (duplicate / zero-area triangles, unreferenced vertices)
before handing it to the constructor.

Half-edge layout: face ``f`` owns half-edges ``3f, 3f+1, 3f+2`` where
half-edge ``3f + k`` runs from ``triangles[f, k]`` to
``triangles[f, (k+1) % 3]``.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeshCleaningWarning, MeshError, NonManifoldError

CLOSED = "closed"
SINGLE_BOUNDARY = "single_boundary"
MULTI_BOUNDARY = "multi_boundary"

# Relative area threshold below which a triangle counts as degenerate.
DEGENERATE_AREA_FACTOR = 1e-12


@dataclass(frozen=True)
class TopologyClass:
    """Surface topology summary: boundary structure and genus."""

    tag: str
    boundary_count: int
    genus: int


class TriSurfaceMesh:
    """Immutable manifold triangle mesh with half-edge adjacency.

    Parameters
    ----------
    vertices : (nv, 3) float array of 3D coordinates.
    triangles : (nt, 3) int array of vertex indices, consistently
        oriented (counterclockwise seen from outside).

    Raises
    ------
    MeshError / NonManifoldError on invalid connectivity.
    """

    def __init__(self, vertices, triangles):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {vertices.shape}")
        if triangles.size == 0:
            raise MeshError("mesh has no triangles")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f"triangles must be (m, 3), got {triangles.shape}")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshError("triangle vertex index out of range")
        same = (
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 2] == triangles[:, 0])
        )
        if same.any():
            raise MeshError(
                f"triangle {int(np.nonzero(same)[0][0])} has repeated vertex indices"
            )

        self.vertices = vertices
        self.triangles = triangles
        self._build_halfedges()
        self._build_boundary_loops()
        self._check_vertex_manifold()
        self.vertices.flags.writeable = False
        self.triangles.flags.writeable = False

    # -- construction helpers -------------------------------------------------

    def _build_halfedges(self):
        tris = self.triangles
        nhe = 3 * len(tris)
        src = tris[:, [0, 1, 2]].ravel()
        dst = tris[:, [1, 2, 0]].ravel()
        directed = {}
        for h in range(nhe):
            key = (int(src[h]), int(dst[h]))
            if key in directed:
                raise NonManifoldError(
                    f"directed edge {key} appears twice: non-manifold or "
                    f"inconsistently oriented input",
                    edge=key,
                )
            directed[key] = h
        twin = np.full(nhe, -1, dtype=np.int64)
        for (a, b), h in directed.items():
            twin[h] = directed.get((b, a), -1)
        self.he_src = src
        self.he_dst = dst
        self.he_twin = twin
        self.he_src.flags.writeable = False
        self.he_dst.flags.writeable = False
        self.he_twin.flags.writeable = False
        # One outgoing half-edge per vertex; boundary half-edge preferred so
        # fan traversal for boundary vertices starts at the open end.
        out = np.full(len(self.vertices), -1, dtype=np.int64)
        for h in range(nhe):
            v = src[h]
            if out[v] == -1 or (twin[h] == -1 and twin[out[v]] != -1):
                out[v] = h
        self._vertex_out = out

    @staticmethod
    def _he_next(h):
        return (h - h % 3) + (h + 1) % 3

    @staticmethod
    def _he_prev(h):
        return (h - h % 3) + (h + 2) % 3

    def _build_boundary_loops(self):
        boundary = np.nonzero(self.he_twin == -1)[0]
        start_of = {}
        for h in boundary:
            v = int(self.he_src[h])
            if v in start_of:
                raise NonManifoldError(
                    f"vertex {v} has two outgoing boundary edges (pinched vertex)",
                    vertex=v,
                )
            start_of[v] = int(h)
        loops = []
        remaining = dict(start_of)
        while remaining:
            v0 = min(remaining)
            loop = []
            v = v0
            while True:
                h = remaining.pop(v)
                loop.append(v)
                v = int(self.he_dst[h])
                if v == v0:
                    break
                if v not in remaining:
                    raise NonManifoldError(
                        f"boundary walk stuck at vertex {v}", vertex=v
                    )
            loops.append(tuple(loop))
        self.boundary_loops = tuple(loops)

    def _check_vertex_manifold(self):
        # Every vertex's incident faces must form one fan; a vertex shared by
        # two disjoint fans breaks one_ring and downstream solvers.
        incident = np.zeros(len(self.vertices), dtype=np.int64)
        np.add.at(incident, self.triangles.ravel(), 1)
        for v in range(len(self.vertices)):
            if incident[v] == 0:
                raise MeshError(f"vertex {v} is not referenced by any triangle")
            seen = self._fan_face_count(v)
            if seen != incident[v]:
                raise NonManifoldError(
                    f"vertex {v} has a disconnected triangle fan", vertex=v
                )

    def _fan_face_count(self, v):
        h0 = int(self._vertex_out[v])
        h = h0
        count = 0
        while True:
            count += 1
            p = self._he_prev(h)
            t = int(self.he_twin[p])
            if t == -1 or t == h0:
                return count
            h = t
            if count > 3 * len(self.triangles):
                raise NonManifoldError(f"fan walk at vertex {v} does not close", vertex=v)

    # -- basic queries ---------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        nb = int(np.count_nonzero(self.he_twin == -1))
        return (3 * self.n_triangles + nb) // 2

    def one_ring(self, vertex):
        """Neighbors of ``vertex`` in counterclockwise order.

        For boundary vertices the fan is open and starts at the outgoing
        boundary edge; for interior vertices the list is cyclic.
        """
        if not 0 <= vertex < self.n_vertices:
            raise MeshError(f"vertex index {vertex} out of range")
        h0 = int(self._vertex_out[vertex])
        ring = []
        h = h0
        while True:
            ring.append(int(self.he_dst[h]))
            p = self._he_prev(h)
            t = int(self.he_twin[p])
            if t == -1:
                ring.append(int(self.he_src[p]))
                return ring
            if t == h0:
                return ring
            h = t

    def is_boundary_vertex(self, vertex):
        h = int(self._vertex_out[vertex])
        return self.he_twin[h] == -1

    def undirected_edges(self):
        """Unique undirected edges as a sorted (n_edges, 2) array."""
        pairs = np.sort(np.stack([self.he_src, self.he_dst], axis=1), axis=1)
        return np.unique(pairs, axis=0)

    def edge_set(self):
        return {tuple(e) for e in self.undirected_edges().tolist()}

    def topology(self):
        b = len(self.boundary_loops)
        chi = self.n_vertices - self.n_edges + self.n_triangles
        genus = (2 - chi - b) // 2
        if b == 0:
            tag = CLOSED
        elif b == 1:
            tag = SINGLE_BOUNDARY
        else:
            tag = MULTI_BOUNDARY
        return TopologyClass(tag=tag, boundary_count=b, genus=genus)

    # -- geometry --------------------------------------------------------------

    def triangle_corners(self):
        """Vertex positions per triangle, shape (nt, 3, 3)."""
        return self.vertices[self.triangles]

    def triangle_areas(self):
        c = self.triangle_corners()
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def total_area(self):
        return float(self.triangle_areas().sum())

    def triangle_normals(self):
        c = self.triangle_corners()
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        norm = np.linalg.norm(cross, axis=1)
        norm[norm == 0.0] = 1.0
        return cross / norm[:, None]

    def vertex_normals(self):
        """Area-weighted average of incident face normals, unit length."""
        c = self.triangle_corners()
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.triangles[:, k], cross)
        norm = np.linalg.norm(acc, axis=1)
        if (norm == 0.0).any():
            bad = int(np.nonzero(norm == 0.0)[0][0])
            raise MeshError(f"vertex {bad} has a zero average normal")
        return acc / norm[:, None]

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def classify_topology(mesh):
    """Topology class of a mesh (boundary count, genus, tag)."""
    return mesh.topology()


# -- cleaning ------------------------------------------------------------------


def clean_triangle_soup(vertices, triangles):
    """Drop duplicate and degenerate triangles and unreferenced vertices.

    Returns (vertices, triangles, report) where report counts what was
    removed.  Degenerate means area below ``1e-12 * bbox_diag**2``.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    report = {"duplicate_triangles": 0, "degenerate_triangles": 0, "unused_vertices": 0}
    if len(triangles):
        key = np.sort(triangles, axis=1)
        _, first = np.unique(key, axis=0, return_index=True)
        keep = np.zeros(len(triangles), dtype=bool)
        keep[np.sort(first)] = True
        report["duplicate_triangles"] = int((~keep).sum())
        triangles = triangles[keep]
    if len(triangles) and len(vertices):
        corners = vertices[triangles]
        cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        lo, hi = vertices.min(axis=0), vertices.max(axis=0)
        diag2 = float(np.sum((hi - lo) ** 2))
        thresh = DEGENERATE_AREA_FACTOR * diag2
        same = (
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 2] == triangles[:, 0])
        )
        good = (areas >= thresh) & ~same
        report["degenerate_triangles"] = int((~good).sum())
        triangles = triangles[good]
    if len(triangles):
        used = np.unique(triangles)
        if len(used) < len(vertices):
            report["unused_vertices"] = int(len(vertices) - len(used))
            remap = np.full(len(vertices), -1, dtype=np.int64)
            remap[used] = np.arange(len(used))
            vertices = vertices[used]
            triangles = remap[triangles]
    return vertices, triangles, report


# -- OBJ -----------------------------------------------------------------------


def _parse_obj(text):
    vertices = []
    uv = []
    faces = []
    face_uv = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshError(f"OBJ line {lineno}: vertex needs 3 coordinates")
            vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
        elif tag == "vt":
            uv.append([float(parts[1]), float(parts[2]) if len(parts) > 2 else 0.0])
        elif tag == "f":
            if len(parts) != 4:
                raise MeshError(
                    f"OBJ line {lineno}: only triangle faces are supported "
                    f"(got {len(parts) - 1} corners)"
                )
            idx = []
            tidx = []
            for entry in parts[1:]:
                fields = entry.split("/")
                i = int(fields[0])
                if i < 0:
                    i = len(vertices) + 1 + i
                idx.append(i - 1)
                if len(fields) > 1 and fields[1]:
                    tidx.append(int(fields[1]) - 1)
            faces.append(idx)
            face_uv.append(tidx if len(tidx) == 3 else None)
    return (
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        np.array(uv, dtype=np.float64).reshape(-1, 2),
        face_uv,
    )


def load_obj_chart(source):
    """Load an OBJ containing per-vertex texture coordinates.

    Returns (mesh, uv) where ``uv`` is (nv, 2).  Fails if the file has no
    usable texture coordinates.
    """
    text = _read_text(source)
    vertices, faces, uv, face_uv = _parse_obj(text)
    mesh = _finish_load(vertices, faces)
    if len(uv) == 0:
        raise MeshError("OBJ has no vt records")
    vert_uv = np.full((len(vertices), 2), np.nan)
    for f, tidx in zip(faces, face_uv):
        if tidx is None:
            raise MeshError("OBJ face without vt references in a chart file")
        for v, t in zip(f, tidx):
            vert_uv[v] = uv[t]
    if np.isnan(vert_uv).any():
        raise MeshError("some vertices have no texture coordinates")
    return mesh, vert_uv


# -- STL -----------------------------------------------------------------------


def _parse_stl_ascii(text):
    coords = []
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("vertex"):
            parts = line.split()
            coords.append([float(parts[1]), float(parts[2]), float(parts[3])])
    if len(coords) % 3 != 0:
        raise MeshError("ASCII STL vertex count is not a multiple of 3")
    return np.array(coords, dtype=np.float64).reshape(-1, 3, 3)


def _parse_stl_binary(data):
    if len(data) < 84:
        raise MeshError("binary STL shorter than its 84-byte header")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) < expected:
        raise MeshError(
            f"binary STL truncated: header promises {count} facets "
            f"({expected} bytes), file has {len(data)}"
        )
    records = np.frombuffer(data, dtype=np.uint8, count=50 * count, offset=84)
    records = records.reshape(count, 50)
    floats = records[:, :48].copy().view("<f4").reshape(count, 4, 3)
    return floats[:, 1:4, :].astype(np.float64)


def _weld_stl(facets):
    """Merge vertices with exactly equal coordinates (no epsilon)."""
    flat = facets.reshape(-1, 3)
    keys = {}
    index = np.empty(len(flat), dtype=np.int64)
    verts = []
    for i, p in enumerate(flat):
        k = p.tobytes()
        j = keys.get(k)
        if j is None:
            j = len(verts)
            keys[k] = j
            verts.append(p)
        index[i] = j
    vertices = np.array(verts, dtype=np.float64).reshape(-1, 3)
    triangles = index.reshape(-1, 3)
    return vertices, triangles


# -- loading / saving ----------------------------------------------------------


def _read_bytes(source):
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    if isinstance(source, bytes):
        return source
    data = source.read()
    if isinstance(data, str):
        return data.encode()
    return data


def _read_text(source):
    return _read_bytes(source).decode("utf-8", errors="replace")


def _infer_format(source, fmt):
    if fmt is not None:
        return fmt.lower()
    if isinstance(source, (str, Path)):
        suffix = Path(source).suffix.lower().lstrip(".")
        if suffix in ("obj", "stl"):
            return suffix
    raise MeshError("cannot infer mesh format; pass fmt='obj' or fmt='stl'")


def _finish_load(vertices, triangles):
    if len(triangles) == 0:
        raise MeshError("mesh file contains no triangles")
    vertices, triangles, report = clean_triangle_soup(vertices, triangles)
    removed = report["duplicate_triangles"] + report["degenerate_triangles"]
    if removed:
        warnings.warn(
            f"dropped {report['degenerate_triangles']} degenerate and "
            f"{report['duplicate_triangles']} duplicate triangle(s)",
            MeshCleaningWarning,
            stacklevel=3,
        )
    if len(triangles) == 0:
        raise MeshError("all triangles were degenerate")
    return TriSurfaceMesh(vertices, triangles)


def load_surface(source, fmt=None):
    """Load a surface mesh from OBJ or STL (ASCII or binary).

    ``source`` may be a path, raw bytes or a file-like object.  STL input
    is welded by exact coordinate equality.  Returns a validated
    :class:`TriSurfaceMesh`.
    """
    fmt = _infer_format(source, fmt)
    if fmt == "obj":
        vertices, faces, _, _ = _parse_obj(_read_text(source))
        return _finish_load(vertices, faces)
    if fmt == "stl":
        data = _read_bytes(source)
        head = data[:5].decode("ascii", errors="replace").lower()
        if head == "solid":
            # An ASCII body must contain facet records; some binary files
            # also start with "solid", so check for the keyword.
            text = data.decode("ascii", errors="ignore")
            if "facet" in text:
                facets = _parse_stl_ascii(text)
            else:
                facets = _parse_stl_binary(data)
        else:
            facets = _parse_stl_binary(data)
        vertices, triangles = _weld_stl(facets)
        return _finish_load(vertices, triangles)
    raise MeshError(f"unsupported mesh format {fmt!r}")


def save_obj(mesh, path, uv=None):
    """Write an OBJ file; float formatting round-trips bit-exactly.

    With ``uv`` (nv, 2) given, one ``vt`` per vertex is written and faces
    reference matching v/vt indices.
    """
    lines = []
    for p in mesh.vertices:
        lines.append(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    if uv is not None:
        uv = np.asarray(uv, dtype=np.float64)
        if uv.shape != (mesh.n_vertices, 2):
            raise MeshError(f"uv must be ({mesh.n_vertices}, 2), got {uv.shape}")
        for q in uv:
            lines.append(f"vt {float(q[0])!r} {float(q[1])!r}")
        for t in mesh.triangles:
            lines.append(f"f {t[0]+1}/{t[0]+1} {t[1]+1}/{t[1]+1} {t[2]+1}/{t[2]+1}")
    else:
        for t in mesh.triangles:
            lines.append(f"f {t[0]+1} {t[1]+1} {t[2]+1}")
    Path(path).write_text("\n".join(lines) + "\n")
