import json

import numpy as np
import pytest

from shapepbdw import morpho, observe, pbdw, pipeline, stokes
from shapepbdw.config import TrainingConfig
from shapepbdw.errors import ConfigError
from shapepbdw.mesh import GeometryDescriptor
from shapepbdw.transport import transport_subspace


def test_single_template_rejected():
    with pytest.raises(ConfigError):
        pipeline.train(TrainingConfig(S_r=[0.14], S_x=[2.0]))


def test_manifest_and_files(small_atlas, small_config):
    root = small_atlas.root
    man = json.loads((root / "manifest.json").read_text())
    assert man["K"] == 4 and len(man["templates"]) == 4
    assert man["seed"] == small_config.seed
    assert man["config_hash"] == small_config.digest()
    assert small_atlas.D.shape == (4, 4)
    for rel, digest in man["files"].items():
        assert pipeline._file_digest(root / rel) == digest


def test_load_atlas_matches(small_atlas):
    back = pipeline.load_atlas(small_atlas.root)
    assert np.array_equal(back.D, small_atlas.D)
    assert np.array_equal(back.model.X, small_atlas.model.X)
    for a, b in zip(back.templates, small_atlas.templates):
        assert np.array_equal(a.space.basis, b.space.basis)
        assert a.descriptor == b.descriptor


def test_train_deterministic(small_config, small_atlas):
    again = pipeline.train(small_config)
    assert np.array_equal(again.D, small_atlas.D)
    assert np.array_equal(again.model.X, small_atlas.model.X)
    assert np.array_equal(again.model.W_map, small_atlas.model.W_map)


def test_estimate_on_template(small_atlas):
    t = small_atlas.templates[1]
    u = t.space.basis @ np.array([0.3, -1.0, 0.2, 0.0, 0.5, 0.1])[:t.space.dim]
    W = pipeline.observation_space(t.mesh, small_atlas.config)
    est = pipeline.estimate(t.descriptor, W.measure(u), small_atlas)
    assert est.exact_match and est.template == 1
    assert np.sqrt((est.result.estimate - u) @ t.mesh.velocity_mass @
                   (est.result.estimate - u)) <= 1e-9 * np.sqrt(u @ t.mesh.velocity_mass @ u)


def test_estimate_generic_matches_manual_chain(small_atlas):
    cfg = small_atlas.config
    g = GeometryDescriptor(0.16, 2.0, 2.4)
    tr = stokes.simulate(g, (0.5, 0.045), cfg.dt, cfg.T_end, h=cfg.h)
    W0 = pipeline.observation_space(tr.mesh, cfg)
    y = W0.measure(tr.snapshots[-1])
    est = pipeline.estimate(g, y, small_atlas)
    assert not est.exact_match
    k = morpho.best_template(g, small_atlas.model)
    t = small_atlas.templates[k]
    V = transport_subspace(t.space, t.descriptor, g, est.mesh)
    W = pipeline.observation_space(est.mesh, cfg)
    manual = pbdw.reconstruct(y, V, W)
    assert est.template == k
    assert np.array_equal(est.result.estimate, manual.estimate)
    zero = pipeline.estimate(g, np.zeros_like(y), small_atlas)
    assert not np.any(zero.result.estimate)


def test_estimate_does_not_solve(small_atlas):
    g = GeometryDescriptor(0.15, 2.0, 2.7)
    mesh_counts = pipeline._counters()
    from shapepbdw.mesh import generate_mesh
    W = pipeline.observation_space(generate_mesh(g, small_atlas.config.h), small_atlas.config)
    pipeline.estimate(g, np.ones(W.dim), small_atlas)
    assert pipeline._counters() == mesh_counts


@pytest.fixture(scope="module")
def small_report(small_atlas, tmp_path_factory):
    out = tmp_path_factory.mktemp("report")
    return pipeline.benchmark(small_atlas, out_dir=out), out


def test_benchmark_contract(small_report, small_atlas):
    rep, out = small_report
    tr = rep.targets[0]
    cfg = small_atlas.config
    assert tr.curves.shape == (4, round(cfg.T_end / cfg.dt))
    assert np.all(np.isfinite(tr.curves)) and np.all(tr.curves >= 0)
    assert 1 <= tr.rank <= 4
    bt = tr.curves[tr.bt]
    assert np.all(bt >= tr.curves.min(axis=0)) and np.all(bt <= tr.curves.max(axis=0))
    assert tr.selection_dH <= tr.selection_bound + 1e-12
    for f in ("curves_G00.csv", "sweep_G00.csv", "selection.csv", "native_compare.csv"):
        assert (out / f).exists()
    lines = (out / "curves_G00.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "t" and lines[-1].startswith("bt,")


def test_benchmark_on_templates_self_selects(small_atlas):
    cfg = small_atlas.config
    grid = [t.descriptor for t in small_atlas.templates[:2]]
    rep = pipeline.benchmark(small_atlas, test_grid=grid, n_target=1)
    for k, tr in enumerate(rep.targets):
        assert tr.bt == k
        assert tr.rank == 1
        assert np.allclose(tr.curves[tr.bt], tr.curves.min(axis=0), rtol=1e-12, atol=1e-15)
