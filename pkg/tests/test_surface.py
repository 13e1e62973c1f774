import io
import math

import numpy as np
import pytest

from surfcover.surface import (
    SURFACE_KINDS,
    EndEffectorTarget,
    MeshError,
    SurfaceMesh,
    cartesian_distance,
    compute_targets,
    generate_benchmark_surface,
    load_mesh,
    load_mesh_file,
)

SQUARE_OBJ = """\
# unit square in the z=0 plane
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
f 1 2 3
f 1 3 4
"""

SQUARE_PLY = """\
ply
format ascii 1.0
comment unit square
element vertex 4
property float x
property float y
property float z
element face 2
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
3 0 1 2
3 0 2 3
"""


def test_obj_square():
    mesh = load_mesh(SQUARE_OBJ, "obj")
    assert mesh.n == 4
    assert mesh.sorted_edges() == [(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]
    assert mesh.adjacency()[0] == [1, 2, 3]


def test_ply_matches_obj():
    a = load_mesh(io.BytesIO(SQUARE_PLY.encode()), "ply")
    b = load_mesh(SQUARE_OBJ.encode(), "obj")
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.faces, b.faces)


def test_obj_slash_and_negative_indices():
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n"
    mesh = load_mesh(text, "obj")
    assert mesh.faces.tolist() == [[0, 1, 2]]


def test_load_mesh_file(tmp_path):
    p = tmp_path / "sq.obj"
    p.write_text(SQUARE_OBJ)
    assert load_mesh_file(p).n == 4


@pytest.mark.parametrize(
    "text, fmt, match",
    [
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n", "obj", "out of range"),
        ("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n", "obj", "zero area"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n", "obj", "degenerate"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n", "obj", "non-triangle"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 5 0\nv 6 5 0\nv 5 6 0\nf 1 2 3\nf 4 5 6\n", "obj", "disconnected"),
        ("v 0 x 0\n", "obj", "line 1"),
        (SQUARE_PLY.replace("3 0 2 3", "3 0 2"), "ply", "line 16"),
        ("plx\n", "ply", "magic"),
        (SQUARE_OBJ, "stl", "unsupported"),
    ],
)
def test_mesh_errors(text, fmt, match):
    with pytest.raises(MeshError, match=match):
        load_mesh(text, fmt)


def test_square_targets_are_the_vertices_with_up_normals():
    mesh = load_mesh(SQUARE_OBJ, "obj")
    targets = compute_targets(mesh)
    assert len(targets) == 4
    for t, v in zip(targets, mesh.vertices):
        assert np.array_equal(t.position, v)
        assert np.allclose(t.normal, [0, 0, 1])


def test_normals_are_area_weighted():
    # vertex 0 touches a flat face (area 2) and a vertical face (area 0.5)
    v = [[0, 0, 0], [2, 0, 0], [0, 2, 0], [0, 0, 1]]
    f = [[0, 1, 2], [0, 3, 1]]
    t = compute_targets(SurfaceMesh(np.array(v, float), np.array(f)))
    # flat face cross = (0,0,4), vertical face cross = (0,2,0)
    expected = np.array([0.0, 2.0, 4.0]) / math.sqrt(20.0)
    assert np.allclose(t[0].normal, expected)
    assert np.allclose(t[2].normal, [0, 0, 1])


def test_cancelling_normals_rejected():
    # two coincident-edge faces with opposite winding around a shared vertex set
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0.0]])
    f = np.array([[0, 1, 2], [3, 2, 1]])
    mesh = SurfaceMesh(v, f)
    with pytest.raises(MeshError, match="cancel"):
        compute_targets(mesh)


def test_target_normal_is_normalized():
    t = EndEffectorTarget([0, 0, 0], [0, 0, 3])
    assert np.allclose(t.normal, [0, 0, 1])
    with pytest.raises(ValueError):
        EndEffectorTarget([0, 0, 0], [0, 0, 0])


def test_cartesian_distance_values():
    a = EndEffectorTarget([0, 0, 0], [0, 0, 1])
    b = EndEffectorTarget([0.3, 0.4, 0], [0, 0, 1])
    c = EndEffectorTarget([0.3, 0.4, 0], [1, 0, 0])
    assert cartesian_distance(a, b) == pytest.approx(0.5, abs=1e-15)
    assert cartesian_distance(a, c) == pytest.approx(0.5 + 0.1 * math.pi / 2, abs=1e-12)
    assert cartesian_distance(a, c, alpha=0.0) == pytest.approx(0.5, abs=1e-15)
    assert cartesian_distance(a, a) == 0.0


@pytest.mark.parametrize("kind", SURFACE_KINDS)
def test_generators_are_valid(kind):
    mesh = generate_benchmark_surface(kind)
    targets = compute_targets(mesh)
    assert mesh.n == len(targets) >= 4
    for t in targets:
        assert np.linalg.norm(t.normal) == pytest.approx(1.0, abs=1e-12)


def test_hemisphere_and_bowl_orientation():
    center = np.array([0.45, 0.0, 0.0])
    hemi = generate_benchmark_surface("hemisphere-exterior", n=40)
    for t in compute_targets(hemi):
        assert np.dot(t.normal, t.position - center) > 0
    c = np.array([0.5, 0.0, 0.25])
    bowl = generate_benchmark_surface("bowl-interior", n=40)
    for t in compute_targets(bowl):
        assert np.dot(t.normal, t.position - c) < 0
    assert hemi.n == 40


def test_analytic_normals_agree_with_faces():
    hemi = generate_benchmark_surface("hemisphere-exterior", n=80)
    face_based = compute_targets(SurfaceMesh(hemi.vertices, hemi.faces))
    for a, b in zip(compute_targets(hemi), face_based):
        assert np.dot(a.normal, b.normal) > 0.95


def test_floor_grid_shape():
    mesh = generate_benchmark_surface("floor-grid", nx=3, ny=5, spacing=0.1)
    assert mesh.n == 15
    # grid edges plus one diagonal per cell
    assert len(mesh.edges) == (2 * 5 + 3 * 4) + 2 * 4


def test_generator_errors():
    with pytest.raises(ValueError):
        generate_benchmark_surface("torus")
    with pytest.raises(ValueError):
        generate_benchmark_surface("floor-grid", nx=1, ny=3)
    with pytest.raises(ValueError):
        generate_benchmark_surface("hemisphere-exterior", n=2)
