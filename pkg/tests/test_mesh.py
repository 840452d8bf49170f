import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shapepbdw.errors import DomainError, GeometryError
from shapepbdw.mesh import (INFLOW, OUTFLOW, WALL, GeometryDescriptor, generate_mesh,
                            half_height_profile, locate_point, locate_points)


def test_profile_examples():
    g = GeometryDescriptor(0.2, 2.0, 2.5)
    assert half_height_profile(g, 2.5) == pytest.approx(0.2, abs=1e-15)
    assert half_height_profile(g, 0.0) == pytest.approx(0.2, abs=1e-15)
    g = GeometryDescriptor(0.14, 2.0, 2.5)
    assert half_height_profile(g, 3.5) == pytest.approx(0.2, abs=1e-15)
    assert half_height_profile(g, 2.5) == pytest.approx(0.14, abs=1e-15)


def test_profile_is_c1_at_junctions():
    g = GeometryDescriptor(0.14, 2.0, 2.5)
    e = 1e-6
    for xj in (1.5, 3.5):
        left = (half_height_profile(g, xj) - half_height_profile(g, xj - e)) / e
        right = (half_height_profile(g, xj + e) - half_height_profile(g, xj)) / e
        assert abs(left) < 1e-5 and abs(right) < 1e-5


def test_profile_domain_error():
    g = GeometryDescriptor(0.14, 2.0, 2.5)
    with pytest.raises(DomainError):
        half_height_profile(g, -0.1)
    with pytest.raises(DomainError):
        half_height_profile(g, 5.01)


@pytest.mark.parametrize("kw", [dict(S_r=0.0, S_l=2, S_x=2), dict(S_r=0.1, S_l=6, S_x=2),
                                dict(S_r=0.1, S_l=2, S_x=-1), dict(S_r=0.1, S_l=2, S_x=2, D=0)])
def test_descriptor_invariants(kw):
    with pytest.raises(GeometryError):
        GeometryDescriptor(**kw)


def test_straight_channel_counts():
    m = generate_mesh(GeometryDescriptor(0.2, 2.0, 2.5), 0.1)
    assert m.n_triangles == 400
    assert m.n_nodes == 255
    m2 = generate_mesh(GeometryDescriptor(0.2, 2.0, 2.5), 0.05)
    assert m2.n_triangles == 4 * m.n_triangles


def test_mesh_size_precondition():
    with pytest.raises(GeometryError):
        generate_mesh(GeometryDescriptor(0.14, 2.0, 2.5), 0.15)
    with pytest.raises(GeometryError):
        generate_mesh(GeometryDescriptor(0.14, 2.0, 2.5), 0.0)


def test_wall_nodes_on_profile(venturi_mesh):
    m = venturi_mesh
    w = m.nodes_with_tag(WALL)
    x, y = m.nodes[w].T
    assert np.max(np.abs(np.abs(y) - m.descriptor.profile(x))) <= 1e-12


def test_orientation_and_boundary_structure(venturi_mesh):
    m = venturi_mesh
    assert np.all(m.areas > 0)
    e = m.boundary_edges
    # closed loop: each edge ends where the next starts
    assert np.array_equal(e[:, 1], np.roll(e[:, 0], -1))
    # each boundary edge belongs to exactly one triangle
    t = m.triangles
    all_edges = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(all_edges, axis=0, return_counts=True)
    lookup = {tuple(u): c for u, c in zip(uniq, counts)}
    assert all(lookup[tuple(sorted(ed))] == 1 for ed in e)
    assert sum(c == 1 for c in counts) == e.shape[0]
    # tags partition the boundary
    assert set(m.boundary_tags) == {INFLOW, OUTFLOW, WALL}
    assert np.all(m.nodes[e[m.boundary_tags == INFLOW]][..., 0] == 0.0)
    assert np.all(m.nodes[e[m.boundary_tags == OUTFLOW]][..., 0] == m.descriptor.L)


def test_area_invariant_and_convergence():
    g = GeometryDescriptor(0.14, 1.93, 2.37)
    hs = np.array([0.1, 0.05, 0.025])
    errs = np.array([abs(generate_mesh(g, h).total_area() - g.area()) / g.area() for h in hs])
    assert np.all(errs <= 1e-6)
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert order >= 1.8


def test_area_matches_trapezoid_of_profile(venturi_mesh):
    m = venturi_mesh
    xs = np.unique(m.nodes[:, 0])
    ref = np.trapezoid(2 * m.descriptor.profile(xs), xs)
    assert m.total_area() == pytest.approx(ref, rel=1e-12)


def test_locate_examples(venturi_mesh):
    m = venturi_mesh
    k = 137
    c = m.nodes[m.triangles[k]].mean(axis=0)
    tri, bary = locate_point(m, c)
    assert tri == k
    assert np.allclose(bary, 1 / 3, atol=1e-12)
    assert locate_point(m, np.array([50.0, 50.0])) is None
    # shared edge midpoint: triangles 0 and 1 share edge (a, c)
    a, _, cc = m.triangles[0]
    mid = 0.5 * (m.nodes[a] + m.nodes[cc])
    tri, bary = locate_point(m, mid)
    assert tri in (0, 1)
    assert np.min(np.abs(bary)) <= 1e-10
    assert bary.sum() == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.14, 0.2), st.floats(1.0, 3.0), st.floats(1.5, 3.5), st.integers(0, 2**31 - 1))
def test_random_interior_points_always_found(sr, sl, sx, seed):
    g = GeometryDescriptor(sr, sl, sx)
    m = generate_mesh(g, 0.05)
    r = np.random.default_rng(seed)
    x = r.uniform(0, g.L, 200)
    xs = np.unique(m.nodes[:, 0])
    # the meshed wall is the piecewise-linear interpolant of the profile
    y = r.uniform(-1, 1, 200) * np.interp(x, xs, g.profile(xs)) * (1 - 1e-9)
    tri, bary = locate_points(m, np.column_stack([x, y]))
    assert np.all(tri >= 0)
    rec = np.einsum("pa,pad->pd", bary, m.nodes[m.triangles[tri]])
    assert np.allclose(rec, np.column_stack([x, y]), atol=1e-12)
