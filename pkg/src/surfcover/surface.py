"""Triangle-mesh surfaces and the end-effector targets derived from them.

A surface is a connected triangle mesh.  Each vertex becomes one
end-effector target: a position plus a unit surface normal.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.spatial import ConvexHull

__all__ = [
    "MeshError",
    "SurfaceMesh",
    "EndEffectorTarget",
    "load_mesh",
    "load_mesh_file",
    "compute_targets",
    "cartesian_distance",
    "target_arrays",
    "generate_benchmark_surface",
    "SURFACE_KINDS",
]

# Faces with less area than this (m^2) are treated as degenerate.
DEGENERATE_AREA = 1e-14

SURFACE_KINDS = ("stairs", "hemisphere-exterior", "bowl-interior", "floor-grid")


class MeshError(ValueError):
    """Raised for malformed, degenerate or disconnected meshes."""


def _edges_from_faces(faces: np.ndarray) -> frozenset:
    edges = set()
    for a, b, c in faces.tolist():
        for i, j in ((a, b), (b, c), (c, a)):
            edges.add((i, j) if i < j else (j, i))
    return frozenset(edges)


def _is_connected(n: int, edges: Iterable[tuple]) -> bool:
    if n == 0:
        return False
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def _face_cross(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    return np.cross(b - a, c - a)


@dataclass(frozen=True)
class SurfaceMesh:
    """Connected triangle mesh.

    ``normals`` is optional; generators of analytic surfaces fill it with
    exact vertex normals, otherwise normals come from the faces.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: Optional[np.ndarray] = None
    edges: frozenset = field(init=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64)
        if f.size == 0:
            raise MeshError("mesh has no faces")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError("non-triangle face")
        if f.min() < 0 or f.max() >= len(v):
            bad = int(np.nonzero((f < 0) | (f >= len(v)))[0][0])
            raise MeshError(f"face {bad} references a vertex index out of range")
        for k, (a, b, c) in enumerate(f.tolist()):
            if a == b or b == c or a == c:
                raise MeshError(f"degenerate face {k}: repeated vertex index")
        area = 0.5 * np.linalg.norm(_face_cross(v, f), axis=1)
        if np.any(area <= DEGENERATE_AREA):
            bad = int(np.nonzero(area <= DEGENERATE_AREA)[0][0])
            raise MeshError(f"degenerate face {bad} has zero area")
        edges = _edges_from_faces(f)
        if not _is_connected(len(v), edges):
            raise MeshError("mesh is disconnected")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "edges", edges)
        if self.normals is not None:
            nrm = np.array(self.normals, dtype=float).reshape(-1, 3)
            if nrm.shape != v.shape:
                raise MeshError("normals must have one row per vertex")
            nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
            nrm.setflags(write=False)
            object.__setattr__(self, "normals", nrm)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def adjacency(self) -> list:
        """Neighbor lists, sorted, one per vertex."""
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return [sorted(a) for a in adj]

    def sorted_edges(self) -> list:
        return sorted(self.edges)


@dataclass(frozen=True)
class EndEffectorTarget:
    position: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        n = np.asarray(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("target normal must be nonzero")
        if abs(norm - 1.0) > 1e-9:
            n = n / norm
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "normal", n)


# ---------------------------------------------------------------- parsing


def _parse_obj(lines: Sequence[str]):
    vertices, faces = [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "v":
            try:
                vertices.append([float(x) for x in parts[1:4]])
            except ValueError:
                raise MeshError(f"line {lineno}: bad vertex coordinates") from None
            if len(vertices[-1]) != 3:
                raise MeshError(f"line {lineno}: vertex needs 3 coordinates")
        elif parts[0] == "f":
            if len(parts) != 4:
                raise MeshError(f"line {lineno}: non-triangle face")
            try:
                # "f 1/2/3" style: only the position index matters
                idx = [int(p.split("/")[0]) for p in parts[1:]]
            except ValueError:
                raise MeshError(f"line {lineno}: bad face indices") from None
            out = []
            for i in idx:
                if i < 0:
                    i = len(vertices) + i + 1
                if i < 1:
                    raise MeshError(f"line {lineno}: face index out of range")
                out.append(i - 1)
            faces.append(out)
    return vertices, faces


def _parse_ply(lines: Sequence[str]):
    if not lines or lines[0].strip() != "ply":
        raise MeshError("line 1: missing 'ply' magic")
    elements = []  # (name, count, [properties])
    lineno = 1
    header_done = False
    for lineno in range(2, len(lines) + 1):
        parts = lines[lineno - 1].split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            if len(parts) < 3 or parts[1] != "ascii" or parts[2] != "1.0":
                raise MeshError(f"line {lineno}: only 'format ascii 1.0' is supported")
        elif parts[0] == "element":
            try:
                elements.append((parts[1], int(parts[2]), []))
            except (IndexError, ValueError):
                raise MeshError(f"line {lineno}: bad element declaration") from None
        elif parts[0] == "property":
            if not elements:
                raise MeshError(f"line {lineno}: property before element")
            elements[-1][2].append(parts[-1])
        elif parts[0] == "end_header":
            header_done = True
            break
        else:
            raise MeshError(f"line {lineno}: unexpected header keyword {parts[0]!r}")
    if not header_done:
        raise MeshError(f"line {lineno}: missing end_header")

    vertices, faces = [], []
    cursor = lineno
    for name, count, props in elements:
        for _ in range(count):
            cursor += 1
            if cursor > len(lines):
                raise MeshError(f"line {cursor}: unexpected end of file in element {name!r}")
            parts = lines[cursor - 1].split()
            try:
                if name == "vertex":
                    vals = [float(x) for x in parts]
                    vertices.append([vals[props.index(a)] for a in ("x", "y", "z")])
                elif name == "face":
                    cnt = int(parts[0])
                    if cnt != 3:
                        raise MeshError(f"line {cursor}: non-triangle face")
                    if len(parts) != 4:
                        raise ValueError
                    faces.append([int(x) for x in parts[1:4]])
            except (ValueError, IndexError):
                raise MeshError(f"line {cursor}: malformed {name} record") from None
    return vertices, faces


def load_mesh(source: Union[BinaryIO, bytes, str], format: str) -> SurfaceMesh:
    """Parse an ASCII OBJ or PLY triangle mesh from a byte stream."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, str):
        data = source.encode()
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MeshError(f"not an ASCII mesh: {exc}") from None
    lines = io.StringIO(text).read().splitlines()
    fmt = format.lower().replace("-ascii", "")
    if fmt == "obj":
        vertices, faces = _parse_obj(lines)
    elif fmt == "ply":
        vertices, faces = _parse_ply(lines)
    else:
        raise MeshError(f"unsupported mesh format {format!r}")
    if not vertices:
        raise MeshError("mesh has no vertices")
    return SurfaceMesh(np.array(vertices, dtype=float), np.array(faces, dtype=np.int64).reshape(-1, 3))


def load_mesh_file(path) -> SurfaceMesh:
    path = Path(path)
    with open(path, "rb") as fh:
        return load_mesh(fh, path.suffix.lstrip("."))


# ---------------------------------------------------------------- targets


def compute_targets(mesh: SurfaceMesh) -> list:
    """One target per vertex; normal is the area-weighted face-normal mean."""
    if mesh.normals is not None:
        normals = mesh.normals
    else:
        cross = _face_cross(mesh.vertices, mesh.faces)
        area = 0.5 * np.linalg.norm(cross, axis=1)
        if np.any(area <= DEGENERATE_AREA):
            bad = int(np.nonzero(area <= DEGENERATE_AREA)[0][0])
            raise MeshError(f"degenerate face {bad} has zero area")
        # |cross| = 2*area, so summing raw cross products weights by area
        acc = np.zeros_like(mesh.vertices)
        for k in range(3):
            np.add.at(acc, mesh.faces[:, k], cross)
        norms = np.linalg.norm(acc, axis=1)
        if np.any(norms <= 1e-15):
            bad = int(np.nonzero(norms <= 1e-15)[0][0])
            raise MeshError(f"vertex {bad}: incident face normals cancel out")
        normals = acc / norms[:, None]
    return [EndEffectorTarget(p, n) for p, n in zip(mesh.vertices, normals)]


def target_arrays(targets: Sequence[EndEffectorTarget]):
    """Stack targets into (n, 3) position and normal arrays."""
    if not targets:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return (np.array([t.position for t in targets]), np.array([t.normal for t in targets]))


def cartesian_distance(a: EndEffectorTarget, b: EndEffectorTarget, alpha: float = 0.1) -> float:
    cos = float(np.dot(a.normal, b.normal))
    cos = min(1.0, max(-1.0, cos))
    return float(np.linalg.norm(a.position - b.position)) + alpha * math.acos(cos)


def cartesian_distance_arrays(pa, na, pb, nb, alpha: float = 0.1) -> np.ndarray:
    """Vectorized distance between broadcastable position/normal arrays."""
    cos = np.clip(np.sum(na * nb, axis=-1), -1.0, 1.0)
    return np.linalg.norm(pa - pb, axis=-1) + alpha * np.arccos(cos)


# ---------------------------------------------------------------- generators


def _grid_faces(rows: int, cols: int) -> np.ndarray:
    faces = []
    for i in range(rows - 1):
        for j in range(cols - 1):
            a = i * cols + j
            b = (i + 1) * cols + j
            c = i * cols + j + 1
            d = (i + 1) * cols + j + 1
            faces.append((a, b, c))
            faces.append((b, d, c))
    return np.array(faces, dtype=np.int64)


def _floor_grid(nx=4, ny=4, spacing=0.05, origin=(0.4, -0.075, 0.0), **_):
    nx, ny = int(nx), int(ny)
    if nx < 2 or ny < 2 or nx * ny < 4:
        raise ValueError("floor-grid needs at least 2x2 vertices")
    if spacing <= 0:
        raise ValueError("floor-grid spacing must be positive")
    ox, oy, oz = origin
    verts = [(ox + i * spacing, oy + j * spacing, oz) for i in range(nx) for j in range(ny)]
    normals = np.tile([0.0, 0.0, 1.0], (len(verts), 1))
    return SurfaceMesh(np.array(verts), _grid_faces(nx, ny), normals=normals)


def _cap_points(n: int, cap_angle: float) -> np.ndarray:
    """Fibonacci-spiral points on the unit-sphere cap around +z."""
    i = np.arange(n) + 0.5
    z = 1.0 - i / n * (1.0 - math.cos(cap_angle))
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _cap_mesh(n: int, cap_angle: float) -> tuple:
    pts = _cap_points(n, cap_angle)
    # hull of cap points plus the antipode is the spherical Delaunay
    # triangulation; faces touching the antipode are dropped
    hull = ConvexHull(np.vstack([pts, [0.0, 0.0, -1.0]]))
    faces = []
    for simplex in hull.simplices:
        if n in simplex:
            continue
        a, b, c = (int(x) for x in simplex)
        nrm = np.cross(pts[b] - pts[a], pts[c] - pts[a])
        if np.dot(nrm, pts[a] + pts[b] + pts[c]) < 0:
            b, c = c, b
        faces.append((a, b, c))
    return pts, np.array(faces, dtype=np.int64)


def _hemisphere(n=60, radius=0.15, center=(0.45, 0.0, 0.0), cap_angle=math.radians(45), inward=False):
    n = int(n)
    if n < 4:
        raise ValueError("hemisphere needs at least 4 vertices")
    if radius <= 0 or not (0 < cap_angle <= math.pi / 2):
        raise ValueError("invalid hemisphere dimensions")
    unit, faces = _cap_mesh(n, cap_angle)
    center = np.asarray(center, dtype=float)
    if inward:
        # the reflection also reverses winding, so faces already face inward
        unit = unit * np.array([1.0, 1.0, -1.0])
    verts = center + radius * unit
    normals = -unit if inward else unit
    return SurfaceMesh(verts, faces, normals=normals)


def _stairs(steps=2, rise=0.08, run=0.1, width=0.15, spacing=0.04, origin=(0.45, -0.075, 0.0), **_):
    steps = int(steps)
    if steps < 1 or rise <= 0 or run <= 0 or width <= 0 or spacing <= 0:
        raise ValueError("invalid stairs dimensions")
    ox, oy, oz = origin
    # profile in the x-z plane: riser, tread, riser, tread, ...
    profile = [(0.0, 0.0)]
    for s in range(steps):
        x0, z0 = s * run, s * rise
        for seg_end in ((x0, z0 + rise), (x0 + run, z0 + rise)):
            start = np.array(profile[-1])
            end = np.array(seg_end)
            count = max(1, int(round(np.linalg.norm(end - start) / spacing)))
            for t in range(1, count + 1):
                profile.append(tuple(start + (end - start) * t / count))
    cols = max(2, int(round(width / spacing)) + 1)
    ys = np.linspace(0.0, width, cols)
    verts = [(ox + x, oy + y, oz + z) for (x, z) in profile for y in ys]
    return SurfaceMesh(np.array(verts), _grid_faces(len(profile), cols))


def generate_benchmark_surface(kind: str, **params) -> SurfaceMesh:
    """Build one of the synthetic desk-scale benchmark surfaces.

    kinds: ``floor-grid`` (nx, ny, spacing, origin), ``hemisphere-exterior``
    and ``bowl-interior`` (n, radius, center, cap_angle), ``stairs``
    (steps, rise, run, width, spacing, origin).
    """
    if kind == "floor-grid":
        return _floor_grid(**params)
    if kind == "hemisphere-exterior":
        return _hemisphere(inward=False, **params)
    if kind == "bowl-interior":
        params.setdefault("center", (0.5, 0.0, 0.25))
        return _hemisphere(inward=True, **params)
    if kind == "stairs":
        return _stairs(**params)
    raise ValueError(f"unknown surface kind {kind!r}; expected one of {SURFACE_KINDS}")
