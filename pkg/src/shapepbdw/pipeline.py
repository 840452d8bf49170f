"""Offline training of the template atlas, online estimation and benchmarks."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, morpho, observe, pbdw, rom, stokes
from .config import TrainingConfig, dump_config, parse_config
from .errors import ConfigError, ContractError, RankError, StageError
from .mesh import GeometryDescriptor, generate_mesh
from .transport import transport_subspace

log = logging.getLogger(__name__)


def _name(prefix, k):
    return f"{prefix}{k:02d}"


def _sample_params(rng, cfg: TrainingConfig, count: int):
    u0 = rng.uniform(cfg.u0[0], cfg.u0[1], size=count)
    mu = rng.uniform(cfg.mu[0], cfg.mu[1], size=count)
    return list(zip(u0.tolist(), mu.tolist()))


def snapshot_set(mesh, params, cfg: TrainingConfig) -> np.ndarray:
    """All velocity snapshots of the trajectories for ``params``, stacked as rows."""
    trajs = [stokes.simulate(mesh, p, cfg.dt, cfg.T_end) for p in params]
    return np.vstack([t.snapshots for t in trajs])


def pod_upto(snapshots, mass, n, mesh=None):
    """POD with ``n`` modes, or as many as the numerical rank allows."""
    try:
        return rom.pod(snapshots, mass, n, mesh=mesh)
    except RankError as exc:
        if exc.achievable < 1:
            raise
        return rom.pod(snapshots, mass, exc.achievable, mesh=mesh)


def observation_space(mesh, cfg: TrainingConfig):
    grid = observe.build_voxel_grid(mesh, cfg.voxel, cfg.beam, cfg.band)
    return observe.riesz_space(grid)


# -- atlas -------------------------------------------------------------------

@dataclass(eq=False)
class Atlas:
    config: TrainingConfig
    templates: list
    D: np.ndarray
    model: morpho.EmbeddingModel
    mds: morpho.MDSResult | None = None
    manifest: dict = field(default_factory=dict)
    root: Path | None = None

    def find(self, g: GeometryDescriptor):
        for k, t in enumerate(self.templates):
            if t.descriptor.matches(g):
                return k
        return None


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _train_template(k, desc, cfg: TrainingConfig):
    name = _name("T", k)
    try:
        g = GeometryDescriptor(*desc, L=cfg.L, D=cfg.D)
    except Exception as exc:
        raise StageError("geometry", name, exc) from exc
    try:
        mesh = generate_mesh(g, cfg.h)
    except Exception as exc:
        raise StageError("mesh", name, exc) from exc
    rng = np.random.default_rng([cfg.seed, k])
    params = _sample_params(rng, cfg, cfg.n_samples)
    try:
        snaps = snapshot_set(mesh, params, cfg)
    except Exception as exc:
        raise StageError("simulate", name, exc) from exc
    try:
        V, sv = rom.pod(snaps, mesh.velocity_mass, cfg.n, mesh=mesh)
    except Exception as exc:
        raise StageError("pod", name, exc) from exc
    return morpho.Template(name, g, mesh, V, sv)


def train(cfg: TrainingConfig, out_dir=None) -> Atlas:
    """Build the template atlas; persist it to ``out_dir`` when given."""
    grid = cfg.template_grid()
    K = len(grid)
    if K < 2:
        raise ConfigError(f"need at least 2 templates for a distance matrix, got K={K}")
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as ex:
            templates = list(ex.map(lambda a: _train_template(a[0], a[1], cfg),
                                    enumerate(grid)))
    else:
        templates = [_train_template(k, d, cfg) for k, d in enumerate(grid)]
    try:
        D = morpho.distance_matrix(templates, jobs=cfg.jobs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("distance_matrix", "*", exc) from exc
    p = cfg.p if cfg.p is not None else morpho.default_dimension(K)
    res = morpho.mds(D, p)
    fgrid = morpho.family_grid(cfg.L, cfg.D, cfg.feature_spacing)
    vox = np.column_stack([morpho.voxelize(t.descriptor, fgrid, cfg.q) for t in templates])
    Wmap = morpho.fit_embedding(vox, res.X)
    model = morpho.EmbeddingModel(p, res.X, Wmap, res.eigenvalues, fgrid,
                                  [(t.name, t.descriptor) for t in templates], cfg.q)
    atlas = Atlas(cfg, templates, D, model, res)
    if out_dir is not None:
        save_atlas(atlas, out_dir)
    return atlas


def save_atlas(atlas: Atlas, out_dir):
    root = Path(out_dir)
    cfg = atlas.config
    files = []

    def rec(rel):
        files.append(rel)
        return root / rel

    for t in atlas.templates:
        base = f"templates/{t.name}"
        io.write_mesh(rec(f"{base}/mesh.txt"), t.mesh)
        io.write_geometry(rec(f"{base}/geom.txt"), t.descriptor)
        io.write_basis(rec(f"{base}/basis.bin"), t.space.basis, t.singular_values)
    io.write_square(rec("distances.csv"), atlas.D)
    io.write_embedding(rec("embedding.txt"), atlas.model)
    files.append("embedding.txt.W.bin")
    with io.atomic_write(root / "config.ini") as fh:
        fh.write(dump_config(cfg))
    files.append("config.ini")
    manifest = {
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "K": len(atlas.templates),
        "n": cfg.n,
        "p": atlas.model.p,
        "templates": [{"name": t.name, "descriptor": list(t.descriptor.as_tuple()),
                       "basis": f"templates/{t.name}/basis.bin",
                       "mesh": f"templates/{t.name}/mesh.txt"} for t in atlas.templates],
        "files": {f: _file_digest(root / f) for f in sorted(files)},
    }
    if atlas.mds is not None:
        manifest["mds_discarded_ratio"] = atlas.mds.discarded_ratio
    with io.atomic_write(root / "manifest.json") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    atlas.manifest = manifest
    atlas.root = root


def load_atlas(root) -> Atlas:
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text())
    cfg = parse_config((root / "config.ini").read_text())
    templates = []
    for entry in manifest["templates"]:
        mesh = io.read_mesh(root / entry["mesh"])
        basis, sv = io.read_basis(root / entry["basis"])
        V = rom.Subspace(basis, mesh.velocity_mass, mesh)
        templates.append(morpho.Template(entry["name"], mesh.descriptor, mesh, V, sv))
    D = io.read_square(root / "distances.csv")
    model = io.read_embedding(root / "embedding.txt")
    return Atlas(cfg, templates, D, model, None, manifest, root)


# -- online -----------------------------------------------------------------

@dataclass(eq=False)
class Estimate:
    result: pbdw.ReconstructionResult
    mesh: object
    template: int
    W: observe.ObservationSpace
    V: rom.Subspace
    exact_match: bool


def _counters():
    return (stokes.CALLS["simulate"], rom.CALLS["pod"])


def estimate(target: GeometryDescriptor, measurements, atlas: Atlas) -> Estimate:
    """Online reconstruction on ``target`` from raw voxel measurements."""
    before = _counters()
    cfg = atlas.config
    k = atlas.find(target)
    exact = k is not None
    if exact:
        t = atlas.templates[k]
        mesh, V = t.mesh, t.space
        W = observation_space(mesh, cfg)
    else:
        mesh = generate_mesh(target, cfg.h)
        W = observation_space(mesh, cfg)
        k = morpho.best_template(target, atlas.model)
        t = atlas.templates[k]
        V = transport_subspace(t.space, t.descriptor, target, mesh)
    y = np.asarray(measurements, dtype=float).ravel()
    if y.size != W.dim:
        raise ContractError(f"expected {W.dim} measurements on the target grid, got {y.size}")
    res = pbdw.reconstruct(y, V, W)
    if _counters() != before:
        raise RuntimeError("online estimation ran a full-order solve or POD")
    return Estimate(res, mesh, k, W, V, exact)


# -- benchmark ----------------------------------------------------------------

def _time_norm(times, values2):
    """``(int_0^T f dt)^{1/2}`` by the trapezoid rule with ``f(0) = 0``."""
    t = np.concatenate([[0.0], times])
    f = np.concatenate([[0.0], values2])
    return float(np.sqrt(_trapz(f, t)))


def _trapz(f, t):
    fn = getattr(np, "trapezoid", None) or np.trapz
    return float(fn(f, t))


def _sq_norms(R, M):
    return np.clip(np.einsum("ij,ij->i", R, (M @ R.T).T), 0.0, None)


@dataclass
class TargetReport:
    name: str
    descriptor: GeometryDescriptor
    times: np.ndarray
    curves: np.ndarray            # (K, n_steps) average relative error per template
    integrated: np.ndarray        # (K,)
    bt: int
    rank: int
    m: int
    native_ratio: float
    native_snapshot_ratio: float
    selection_dH: float
    selection_bound: float
    sweep: pbdw.SweepResult


@dataclass
class BenchmarkReport:
    targets: list
    template_names: list

    def min_curve(self, k):
        return self.targets[k].curves.min(axis=0)


def benchmark(atlas: Atlas, test_grid=None, n_target: int | None = None,
              seed: int | None = None, out_dir=None) -> BenchmarkReport:
    """Reconstruct ground truths on each test geometry with every template."""
    cfg = atlas.config
    test_grid = cfg.test_grid() if test_grid is None else test_grid
    n_target = cfg.n_target if n_target is None else n_target
    seed = cfg.test_seed if seed is None else seed
    reports = []
    for k, desc in enumerate(test_grid):
        g = desc if isinstance(desc, GeometryDescriptor) else GeometryDescriptor(
            *desc, L=cfg.L, D=cfg.D)
        reports.append(_bench_target(atlas, _name("G", k), k, g, n_target, seed))
    rep = BenchmarkReport(reports, [t.name for t in atlas.templates])
    if out_dir is not None:
        write_report(rep, out_dir)
    return rep


def _bench_target(atlas, name, k, g, n_target, seed):
    cfg = atlas.config
    mesh = generate_mesh(g, cfg.h)
    M = mesh.velocity_mass
    W = observation_space(mesh, cfg)
    rng = np.random.default_rng([seed, k])
    truths = [stokes.simulate(mesh, p, cfg.dt, cfg.T_end)
              for p in _sample_params(rng, cfg, n_target)]
    times = truths[0].times
    S = np.vstack([t.snapshots for t in truths])
    Y = W.measure(S)
    nt = times.size
    norms2 = _sq_norms(S, M).reshape(n_target, nt)
    scale = np.array([_time_norm(times, r) for r in norms2])
    K = len(atlas.templates)
    curves = np.empty((K, nt))
    moved = []
    for j, t in enumerate(atlas.templates):
        Vh = transport_subspace(t.space, t.descriptor, g, mesh)
        moved.append(Vh)
        est = pbdw.reconstruct_many(Y, Vh, W)
        err = np.sqrt(_sq_norms(S - est, M)).reshape(n_target, nt)
        curves[j] = (err / scale[:, None]).mean(axis=0)
    integrated = np.array([_trapz(c, times) for c in curves])
    bt = morpho.best_template(g, atlas.model)
    rank = 1 + int(np.sum(integrated < integrated[bt]))

    # test-only reference: native reduced model on the test geometry
    nrng = np.random.default_rng([seed, 1000 + k])
    params = _sample_params(nrng, cfg, cfg.native_samples)
    order = nrng.permutation(len(params))
    n_train = max(1, int(round(0.8 * len(params))))
    train_p = [params[i] for i in order[:n_train]]
    val_p = [params[i] for i in order[n_train:]] or train_p
    native_snaps = snapshot_set(mesh, train_p, cfg)
    big, _ = pod_upto(native_snaps, M, max(cfg.n, W.dim), mesh=mesh)
    Vn = big.truncate(min(cfg.n, big.dim))
    A_nat = pbdw.reconstruct_many(Y, Vn, W)
    A_hat = pbdw.reconstruct_many(Y, moved[bt], W)
    diff2 = _sq_norms(A_nat - A_hat, M).reshape(n_target, nt)
    ratios = [_time_norm(times, d) / s for d, s in zip(diff2, scale)]
    snap_ratio = np.sqrt(diff2.ravel()) / np.sqrt(np.maximum(norms2.ravel(), 1e-300))

    tmpl = atlas.templates[bt]
    nat_t = morpho.Template(name, g, mesh, Vn)
    dH = morpho.sphere_hausdorff(moved[bt], Vn)
    rho2 = morpho.rho_squared(nat_t, morpho.Template(tmpl.name, tmpl.descriptor, tmpl.mesh,
                                                       tmpl.space))
    val = snapshot_set(mesh, val_p, cfg)
    sw = pbdw.sweep_n(val, big, W, "ms", n_max=cfg.n_max)
    return TargetReport(name, g, times, curves, integrated, bt, rank, W.dim,
                        float(max(ratios)), float(snap_ratio.max()), dH,
                        float(np.sqrt(2.0 * rho2)), sw)


def write_report(rep: BenchmarkReport, out_dir):
    root = Path(out_dir)
    names = rep.template_names
    sel = []
    nat = []
    for tr in rep.targets:
        rows = [[float(t)] + [float(v) for v in tr.curves[:, i]] for i, t in enumerate(tr.times)]
        rows.append(["bt"] + [int(j == tr.bt) for j in range(len(names))])
        io.write_csv(root / f"curves_{tr.name}.csv", ["t"] + names, rows)
        d = tr.descriptor
        best = int(np.argmin(tr.integrated))
        sel.append([tr.name, float(d.S_r), float(d.S_l), float(d.S_x), names[tr.bt], tr.rank,
                    names[best], float(tr.integrated[tr.bt]), float(tr.integrated[best]), tr.m])
        nat.append([tr.name, tr.native_ratio, tr.native_snapshot_ratio, tr.selection_dH,
                    tr.selection_bound])
        io.write_csv(root / f"sweep_{tr.name}.csv", ["n", "error", "beta"],
                     [[int(n), float(e), float(b)] for n, e, b in
                      zip(tr.sweep.n, tr.sweep.error, tr.sweep.beta)])
    io.write_csv(root / "selection.csv",
                 ["target", "S_r", "S_l", "S_x", "bt_template", "rank", "best_template",
                  "bt_integrated_error", "best_integrated_error", "m"], sel)
    io.write_csv(root / "native_compare.csv",
                 ["target", "max_ratio", "max_snapshot_ratio", "dH_selected",
                  "sqrt2_rho_selected"], nat)
