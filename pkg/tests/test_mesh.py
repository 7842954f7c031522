import io

import numpy as np
import pytest

from stiffopt.errors import MeshCleaningWarning, MeshError, NonManifoldError
from stiffopt.mesh import (
    CLOSED,
    MULTI_BOUNDARY,
    SINGLE_BOUNDARY,
    TriSurfaceMesh,
    classify_topology,
    load_surface,
    save_obj,
)

from meshgen import (
    capsule,
    cylinder_mesh,
    grid_mesh,
    icosphere,
    random_disk,
    single_triangle,
    tetrahedron,
    umbrella,
)

SINGLE_TRI_OBJ = """\
v 0 0 0
v 1 0 0
v 0 1 0
f 1 2 3
"""


def test_load_single_triangle_obj():
    mesh = load_surface(SINGLE_TRI_OBJ.encode(), fmt="obj")
    assert mesh.n_vertices == 3
    assert mesh.n_triangles == 1
    assert len(mesh.boundary_loops) == 1
    assert len(mesh.boundary_loops[0]) == 3


def test_tetrahedron_is_closed():
    topo = classify_topology(tetrahedron())
    assert topo.tag == CLOSED
    assert topo.boundary_count == 0
    assert topo.genus == 0


def test_cylinder_wall_is_multi_boundary():
    topo = classify_topology(cylinder_mesh(12, 4))
    assert topo.tag == MULTI_BOUNDARY
    assert topo.boundary_count == 2
    assert topo.genus == 0


def test_disk_square_is_single_boundary():
    topo = classify_topology(grid_mesh(3, 3))
    assert topo.tag == SINGLE_BOUNDARY
    assert topo.boundary_count == 1
    assert topo.genus == 0


def test_sphere_topology():
    topo = classify_topology(icosphere(1))
    assert topo.tag == CLOSED
    assert topo.genus == 0


def test_one_ring_umbrella_apex():
    mesh = umbrella(6)
    ring = mesh.one_ring(0)
    assert len(ring) == 6
    assert sorted(ring) == [1, 2, 3, 4, 5, 6]
    # cyclic counterclockwise order around the apex
    pos = {v: k for k, v in enumerate(ring)}
    start = pos[1]
    assert [ring[(start + k) % 6] for k in range(6)] == [1, 2, 3, 4, 5, 6]


def test_one_ring_triangle_corner():
    ring = single_triangle().one_ring(0)
    assert len(ring) == 2
    assert set(ring) == {1, 2}


def test_one_ring_grid_interior():
    # interior vertex of the structured grid: 6 neighbors by construction
    mesh = grid_mesh(4, 4)
    interior = [
        v for v in range(mesh.n_vertices) if not mesh.is_boundary_vertex(v)
    ]
    assert interior
    for v in interior:
        assert len(mesh.one_ring(v)) == 6


def test_one_ring_boundary_is_ccw_open_fan():
    mesh = grid_mesh(2, 2)
    # boundary corner vertex (0,0): neighbors along +x then the diagonal fan
    ring = mesh.one_ring(0)
    assert ring[0] != ring[-1]
    assert len(ring) == len(set(ring))


def test_closed_mesh_has_all_twins():
    for mesh in (tetrahedron(), icosphere(1)):
        assert len(mesh.boundary_loops) == 0
        assert (mesh.he_twin >= 0).all()


def test_one_ring_reconstructs_triangles():
    # walking consecutive ring pairs around every vertex must rebuild the
    # exact triangle set (each triangle appears at all three corners)
    for mesh in (grid_mesh(3, 3), tetrahedron(), cylinder_mesh(8, 3)):
        rebuilt = set()
        for v in range(mesh.n_vertices):
            ring = mesh.one_ring(v)
            closed = not mesh.is_boundary_vertex(v)
            n = len(ring)
            pairs = n if closed else n - 1
            for k in range(pairs):
                a, b = ring[k], ring[(k + 1) % n]
                rebuilt.add(frozenset((v, a, b)))
        expected = {frozenset(t) for t in mesh.triangles.tolist()}
        assert rebuilt == expected


def test_boundary_loops_partition_boundary_edges():
    mesh = cylinder_mesh(10, 3)
    n_boundary_he = int(np.count_nonzero(mesh.he_twin == -1))
    assert sum(len(l) for l in mesh.boundary_loops) == n_boundary_he


def test_boundary_loop_surface_on_left():
    # planar CCW disk: boundary traversal must be counterclockwise
    mesh = grid_mesh(3, 3)
    loop = mesh.boundary_loops[0]
    pts = mesh.vertices[list(loop)][:, :2]
    area2 = 0.0
    for k in range(len(pts)):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % len(pts)]
        area2 += x0 * y1 - x1 * y0
    assert area2 > 0


def test_obj_roundtrip_idempotent(tmp_path):
    mesh = random_disk(30, 12, seed=3)
    p1 = tmp_path / "a.obj"
    p2 = tmp_path / "b.obj"
    save_obj(mesh, p1)
    m2 = load_surface(p1)
    save_obj(m2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(mesh.vertices, m2.vertices)
    assert np.array_equal(mesh.triangles, m2.triangles)


def test_stl_binary_weld_roundtrip(tmp_path):
    import struct

    mesh = tetrahedron()
    corners = mesh.triangle_corners().astype(np.float32)
    blob = b"\x00" * 80 + struct.pack("<I", len(corners))
    for tri in corners:
        blob += struct.pack("<3f", 0.0, 0.0, 0.0)
        for p in tri:
            blob += struct.pack("<3f", *p)
        blob += b"\x00\x00"
    path = tmp_path / "tet.stl"
    path.write_bytes(blob)
    loaded = load_surface(path)
    assert loaded.n_vertices == 4
    assert loaded.n_triangles == 4
    assert classify_topology(loaded).tag == CLOSED


def test_stl_ascii(tmp_path):
    mesh = tetrahedron()
    lines = ["solid tet"]
    for tri in mesh.triangle_corners():
        lines.append("facet normal 0 0 0")
        lines.append("outer loop")
        for p in tri:
            lines.append(f"vertex {p[0]} {p[1]} {p[2]}")
        lines.append("endloop")
        lines.append("endfacet")
    lines.append("endsolid tet")
    path = tmp_path / "tet.stl"
    path.write_text("\n".join(lines))
    loaded = load_surface(path)
    assert loaded.n_vertices == 4
    assert loaded.n_triangles == 4


def test_nonmanifold_edge_rejected():
    v = np.array(
        [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]], dtype=float
    )
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 1, 4]])
    with pytest.raises(NonManifoldError) as err:
        TriSurfaceMesh(v, f)
    assert err.value.edge is not None or err.value.vertex is not None


def test_inconsistent_orientation_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
    # second triangle repeats the directed edge (0, 1)
    f = np.array([[0, 1, 2], [0, 1, 3]])
    with pytest.raises(NonManifoldError):
        TriSurfaceMesh(v, f)


def test_empty_mesh_rejected():
    with pytest.raises(MeshError):
        load_surface(b"v 0 0 0\n", fmt="obj")


def test_degenerate_triangle_dropped_with_warning():
    obj = SINGLE_TRI_OBJ + "v 2 0 0\nf 1 2 4\n"  # (1,2,4) is collinear
    with pytest.warns(MeshCleaningWarning):
        mesh = load_surface(obj.encode(), fmt="obj")
    assert mesh.n_triangles == 1


def test_duplicate_triangle_dropped_with_warning():
    obj = SINGLE_TRI_OBJ + "f 2 3 1\n"
    with pytest.warns(MeshCleaningWarning):
        mesh = load_surface(obj.encode(), fmt="obj")
    assert mesh.n_triangles == 1


def test_capsule_closed():
    topo = classify_topology(capsule())
    assert topo.tag == CLOSED
    assert topo.genus == 0


def test_mesh_is_immutable():
    mesh = single_triangle()
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 5.0


def test_vertex_normals_unit_and_outward():
    mesh = icosphere(1)
    n = mesh.vertex_normals()
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
    # sphere about origin: normals roughly radial
    r = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1)[:, None]
    assert (np.sum(n * r, axis=1) > 0.9).all()


def test_file_like_source():
    mesh = load_surface(io.BytesIO(SINGLE_TRI_OBJ.encode()), fmt="obj")
    assert mesh.n_triangles == 1
