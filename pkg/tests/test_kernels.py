import numpy as np
import pytest
import scipy.sparse as sp

from shapepbdw import _kernels
from shapepbdw.mesh import GeometryDescriptor, generate_mesh

numba_impl = pytest.importorskip("shapepbdw._kernels.numba_impl")
numpy_impl = _kernels.get_backend("numpy")


@pytest.fixture(scope="module")
def mesh():
    return generate_mesh(GeometryDescriptor(0.15, 1.8, 2.7), 0.05)


def test_backend_selection():
    assert _kernels.BACKEND in ("numba", "numpy")
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


def test_gradients_parity(mesh):
    args = (np.ascontiguousarray(mesh.nodes), np.ascontiguousarray(mesh.triangles))
    a1, g1 = numpy_impl.p1_gradients(*args)
    a2, g2 = numba_impl.p1_gradients(*args)
    assert np.allclose(a1, a2, rtol=1e-14, atol=0)
    assert np.allclose(g1, g2, rtol=1e-12, atol=1e-12)


def test_locate_parity(mesh, rng):
    origin, cell, nbx, nby, ptr, bt = mesh.bins()
    pts = np.column_stack([rng.uniform(-0.1, 5.1, 3000), rng.uniform(-0.25, 0.25, 3000)])
    args = (np.ascontiguousarray(mesh.nodes), np.ascontiguousarray(mesh.triangles),
            np.asarray(origin, dtype=float), float(cell), int(nbx), int(nby), ptr, bt, pts,
            1e-10)
    t1, b1 = numpy_impl.locate(*args)
    t2, b2 = numba_impl.locate(*args)
    assert np.array_equal(t1 >= 0, t2 >= 0)
    ok = t1 >= 0
    # a point on a shared edge may be claimed by either neighbour; the
    # interpolated coordinates must agree
    X1 = np.einsum("pa,pad->pd", b1[ok], mesh.nodes[mesh.triangles[t1[ok]]])
    X2 = np.einsum("pa,pad->pd", b2[ok], mesh.nodes[mesh.triangles[t2[ok]]])
    assert np.allclose(X1, pts[ok], atol=1e-12) and np.allclose(X2, pts[ok], atol=1e-12)


def test_clip_weights_parity(mesh):
    args = (np.ascontiguousarray(mesh.nodes), np.ascontiguousarray(mesh.triangles),
            np.array([0.0, -0.2]), 0.25, 20, 2)
    mats = []
    for impl in (numpy_impl, numba_impl):
        r, c, v = impl.clip_weights(*args)
        mats.append(sp.coo_matrix((v, (r, c)), shape=(40, mesh.n_nodes)).toarray())
    assert np.allclose(mats[0], mats[1], rtol=1e-12, atol=1e-15)
    assert mats[0].sum() == pytest.approx(mesh.total_area(), rel=1e-12)


@pytest.mark.parametrize("flag, expected", [("0", "numpy"), ("off", "numpy"), ("1", "numba")])
def test_env_flag(flag, expected):
    import os
    import subprocess
    import sys
    env = dict(os.environ, SHAPEPBDW_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c",
                          "from shapepbdw import _kernels; print(_kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True).stdout
    assert out.strip() == expected
