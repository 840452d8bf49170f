import subprocess
import sys

import numpy as np
import pytest

from shapepbdw import io
from shapepbdw.cli import main
from shapepbdw.mesh import GeometryDescriptor

TINY = """
[templates]
S_r = 0.14, 0.18
S_x = 2.0
[sampling]
n_samples = 2
[discretization]
h = 0.08
T_end = 0.2
[rom]
n = 4
[benchmark]
test_S_r = 0.16
test_S_x = 2.3
n_target = 1
native_samples = 2
"""


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    io.write_geometry(d / "a.txt", GeometryDescriptor(0.14, 2.0, 2.0))
    io.write_geometry(d / "b.txt", GeometryDescriptor(0.18, 2.0, 2.5))
    for name in ("a", "b"):
        assert main(["simulate", "--geom", str(d / f"{name}.txt"), "--u0", "0.6",
                     "--mu", "0.04", "--tend", "0.2", "--h", "0.08",
                     "--out", str(d / f"{name}.bin"), "--mesh-out",
                     str(d / f"{name}_mesh.txt")]) == 0
        assert main(["pod", "--snaps", str(d / f"{name}.bin"), "--mesh",
                     str(d / f"{name}_mesh.txt"), "--n", "3",
                     "--out", str(d / f"{name}_V.bin")]) == 0
    return d


def test_measure_reconstruct_sweep(work, capsys):
    d = work
    args = ["--mesh", str(d / "a_mesh.txt")]
    assert main(["measure", *args, "--snaps", str(d / "a.bin"), "--out", str(d / "y.csv"),
                 "--wspace-out", str(d / "w.txt")]) == 0
    assert main(["reconstruct", *args, "--basis", str(d / "a_V.bin"), "--wspace",
                 str(d / "w.txt"), "--measurements", str(d / "y.csv"),
                 "--out", str(d / "est.bin")]) == 0
    assert "beta=" in capsys.readouterr().out
    est = io.read_snapshots(d / "est.bin")[0]
    truth = io.read_snapshots(d / "a.bin")[-1]
    assert np.linalg.norm(est - truth) < 0.1 * np.linalg.norm(truth)
    assert main(["sweep-n", *args, "--basis", str(d / "a_V.bin"), "--wspace",
                 str(d / "w.txt"), "--snaps", str(d / "a.bin"), "--out",
                 str(d / "curve.csv")]) == 0
    header = (d / "curve.csv").read_text().splitlines()[0]
    assert header == "n,error,beta"


def test_transport_distmat_mds_embedding(work, capsys):
    d = work
    assert main(["transport", "--src-geom", str(d / "a.txt"), "--dst-geom", str(d / "b.txt"),
                 "--src-mesh", str(d / "a_mesh.txt"), "--dst-mesh", str(d / "b_mesh.txt"),
                 "--basis", str(d / "a_V.bin"), "--out", str(d / "ab.bin")]) == 0
    B, _ = io.read_basis(d / "ab.bin")
    assert B.shape[1] == 3
    assert main(["distmat", "--meshes", str(d / "a_mesh.txt"), str(d / "b_mesh.txt"),
                 "--bases", str(d / "a_V.bin"), str(d / "b_V.bin"),
                 "--out", str(d / "D.csv")]) == 0
    D = io.read_square(d / "D.csv")
    assert D.shape == (2, 2) and D[0, 1] == D[1, 0] > 0
    with pytest.warns(RuntimeWarning):
        assert main(["mds", "--dist", str(d / "D.csv"), "--p", "2", "--out",
                     str(d / "mds.txt")]) == 0
    assert main(["fit-embedding", "--mds", str(d / "mds.txt"), "--geoms", str(d / "a.txt"),
                 str(d / "b.txt"), "--out", str(d / "emb.txt")]) == 0
    capsys.readouterr()
    assert main(["best-template", "--geom", str(d / "b.txt"), "--model",
                 str(d / "emb.txt")]) == 0
    assert capsys.readouterr().out.split() == ["1", "b"]


def test_train_estimate_benchmark(work, capsys):
    d = work
    (d / "tiny.ini").write_text(TINY)
    with pytest.warns(RuntimeWarning):  # K = 2 leaves one MDS dimension
        assert main(["train", "--config", str(d / "tiny.ini"),
                     "--out-dir", str(d / "atlas")]) == 0
    assert (d / "atlas" / "manifest.json").exists()
    io.write_geometry(d / "t.txt", GeometryDescriptor(0.16, 2.0, 2.3))
    # measurements of the target geometry taken from a simulated snapshot
    assert main(["simulate", "--geom", str(d / "t.txt"), "--u0", "0.5", "--mu", "0.05",
                 "--tend", "0.1", "--h", "0.08", "--out", str(d / "t.bin"),
                 "--mesh-out", str(d / "t_mesh.txt")]) == 0
    assert main(["measure", "--mesh", str(d / "t_mesh.txt"), "--snaps", str(d / "t.bin"),
                 "--out", str(d / "ty.csv")]) == 0
    assert main(["estimate", "--atlas", str(d / "atlas"), "--geom", str(d / "t.txt"),
                 "--measurements", str(d / "ty.csv"), "--out", str(d / "te.bin")]) == 0
    assert "template=" in capsys.readouterr().out
    assert main(["benchmark", "--atlas", str(d / "atlas"), "--out", str(d / "rep")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("G00 bt=")
    assert (d / "rep" / "selection.csv").exists()


def test_errors_return_one(tmp_path, capsys):
    (tmp_path / "g.txt").write_text("S_r = -1\nS_l = 2\nS_x = 2\n")
    rc = main(["simulate", "--geom", str(tmp_path / "g.txt"), "--u0", "0.5", "--mu", "0.04",
               "--out", str(tmp_path / "o.bin")])
    assert rc == 1
    assert "error" in capsys.readouterr().err.lower()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "shapepbdw", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "benchmark" in r.stdout
