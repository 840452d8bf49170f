"""Command-line interface."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, morpho, observe, pbdw, pipeline, rom, stokes
from .config import TrainingConfig, load_config
from .errors import ShapePBDWError
from .mesh import generate_mesh
from .transport import transport_subspace


def _pair(text):
    return io.parse_pair(text)


def _wspace(args_or_path, mesh):
    spec = io.read_wspace(args_or_path)
    grid = observe.build_voxel_grid(mesh, spec["s"], spec["beam"], spec.get("band"))
    return observe.riesz_space(grid)


def cmd_simulate(args):
    g = io.read_geometry(args.geom)
    mesh = generate_mesh(g, args.h)
    if args.steady:
        u, _ = stokes.solve_steady(mesh, args.u0, args.mu)
        io.write_snapshots(args.out, u[None])
    else:
        traj = stokes.simulate(mesh, (args.u0, args.mu), args.dt, args.tend)
        io.write_snapshots(args.out, traj.snapshots)
    if args.mesh_out:
        io.write_mesh(args.mesh_out, mesh)


def cmd_pod(args):
    mesh = io.read_mesh(args.mesh)
    snaps = np.vstack([io.read_snapshots(f) for f in args.snaps])
    V, sv = rom.pod(snaps, mesh.velocity_mass, args.n, mesh=mesh)
    io.write_basis(args.out, V.basis, sv)
    print(f"n={V.dim} sigma_1={sv[0]:.6g} sigma_n={sv[V.dim - 1]:.6g}")


def cmd_measure(args):
    mesh = io.read_mesh(args.mesh)
    snaps = io.read_snapshots(args.snaps)
    grid = observe.build_voxel_grid(mesh, args.voxel, args.beam, args.band)
    y = observe.measure(snaps[args.index], grid)
    io.write_measurements(args.out, y, grid.active)
    if args.wspace_out:
        io.write_wspace(args.wspace_out, args.voxel, grid.beam, args.band)


def _load_space(basis_path, mesh):
    B, _ = io.read_basis(basis_path)
    return rom.Subspace(B, mesh.velocity_mass, mesh)


def cmd_reconstruct(args):
    mesh = io.read_mesh(args.mesh)
    V = _load_space(args.basis, mesh)
    W = _wspace(args.wspace, mesh)
    ids, y = io.read_measurements(args.measurements)
    if not np.array_equal(ids, W.grid.active):
        raise ShapePBDWError("measurement voxel ids do not match the observation grid")
    res = pbdw.reconstruct(y, V, W)
    io.write_snapshots(args.out, res.estimate[None])
    print(f"beta={res.beta:.6g}")


def cmd_sweep(args):
    mesh = io.read_mesh(args.mesh)
    V = _load_space(args.basis, mesh)
    W = _wspace(args.wspace, mesh)
    snaps = np.vstack([io.read_snapshots(f) for f in args.snaps])
    sw = pbdw.sweep_n(snaps, V, W, args.mode, n_max=args.n_max)
    io.write_csv(args.out, ["n", "error", "beta"],
                 [[int(n), float(e), float(b)] for n, e, b in zip(sw.n, sw.error, sw.beta)])
    print(f"n*={sw.n_star}")


def cmd_transport(args):
    src = io.read_geometry(args.src_geom)
    dst = io.read_geometry(args.dst_geom)
    src_mesh = io.read_mesh(args.src_mesh)
    dst_mesh = io.read_mesh(args.dst_mesh)
    B, sv = io.read_basis(args.basis)
    V = rom.Subspace(B, src_mesh.velocity_mass, src_mesh)
    out = transport_subspace(V, src, dst, dst_mesh, use_piola=not args.no_piola)
    io.write_basis(args.out, out.basis, sv[:out.dim])
    print(f"n'={out.dim}")


def _templates_from(meshes, bases):
    if len(meshes) != len(bases):
        raise ShapePBDWError("--meshes and --bases must have equal length")
    out = []
    for k, (mp, bp) in enumerate(zip(meshes, bases)):
        mesh = io.read_mesh(mp)
        out.append(morpho.Template(Path(bp).stem, mesh.descriptor, mesh, _load_space(bp, mesh)))
    return out


def cmd_distmat(args):
    D = morpho.distance_matrix(_templates_from(args.meshes, args.bases), jobs=args.jobs)
    io.write_square(args.out, D)


def cmd_mds(args):
    D = io.read_square(args.dist)
    res = morpho.mds(D, args.p)
    with io.atomic_write(args.out) as fh:
        fh.write("eigenvalues " + " ".join("%.17g" % v for v in res.eigenvalues) + "\n")
        fh.write(f"discarded_ratio {res.discarded_ratio:.17g}\n")
        fh.write(io.dumps_array(res.X))
    print(f"kept {res.kept} dimension(s), discarded ratio {res.discarded_ratio:.3g}")


def _read_mds(path):
    lines = Path(path).read_text().splitlines()
    eig = np.array([float(v) for v in lines[0].split()[1:]])
    X = np.array([[float(v) for v in ln.split()] for ln in lines[2:] if ln.strip()])
    return X, eig


def cmd_fit_embedding(args):
    X, eig = _read_mds(args.mds)
    geoms = [io.read_geometry(f) for f in args.geoms]
    grid = morpho.family_grid(geoms[0].L, geoms[0].D, args.spacing)
    V = np.column_stack([morpho.voxelize(g, grid, args.q) for g in geoms])
    Wm = morpho.fit_embedding(V, X)
    names = [Path(f).stem for f in args.geoms]
    model = morpho.EmbeddingModel(X.shape[0], X, Wm, eig, grid, list(zip(names, geoms)), args.q)
    io.write_embedding(args.out, model)


def cmd_best_template(args):
    model = io.read_embedding(args.model)
    k = morpho.best_template(io.read_geometry(args.geom), model)
    print(f"{k} {model.registry[k][0]}")


def cmd_train(args):
    cfg = load_config(args.config) if args.config else TrainingConfig()
    if args.jobs is not None:
        cfg.jobs = args.jobs
    atlas = pipeline.train(cfg, args.out_dir)
    print(f"trained {len(atlas.templates)} templates into {args.out_dir}")


def cmd_estimate(args):
    atlas = pipeline.load_atlas(args.atlas)
    g = io.read_geometry(args.geom)
    _, y = io.read_measurements(args.measurements)
    est = pipeline.estimate(g, y, atlas)
    io.write_snapshots(args.out, est.result.estimate[None])
    if args.mesh_out:
        io.write_mesh(args.mesh_out, est.mesh)
    print(f"template={atlas.templates[est.template].name} beta={est.result.beta:.6g}")


def cmd_benchmark(args):
    atlas = pipeline.load_atlas(args.atlas)
    if args.config:
        test_cfg = load_config(args.config)
        grid, n_target, seed = test_cfg.test_grid(), test_cfg.n_target, test_cfg.test_seed
    else:
        grid = n_target = seed = None
    rep = pipeline.benchmark(atlas, grid, n_target, seed, out_dir=args.out)
    for tr in rep.targets:
        print(f"{tr.name} bt={rep.template_names[tr.bt]} rank={tr.rank} "
              f"native_ratio={tr.native_ratio:.4g} n*={tr.sweep.n_star}")


def build_parser():
    ap = argparse.ArgumentParser(prog="shapepbdw", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the Stokes solver on one geometry")
    p.add_argument("--geom", required=True)
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--tend", type=float, default=0.5)
    p.add_argument("--h", type=float, default=0.04)
    p.add_argument("--out", required=True)
    p.add_argument("--steady", action="store_true")
    p.add_argument("--mesh-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pod", help="POD basis from snapshot files")
    p.add_argument("--snaps", nargs="+", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pod)

    p = sub.add_parser("measure", help="voxel measurements of one snapshot")
    p.add_argument("--mesh", required=True)
    p.add_argument("--snaps", required=True)
    p.add_argument("--index", type=int, default=-1)
    p.add_argument("--voxel", type=float, default=0.25)
    p.add_argument("--beam", type=_pair, default=observe.DEFAULT_BEAM)
    p.add_argument("--band", type=_pair)
    p.add_argument("--out", required=True)
    p.add_argument("--wspace-out")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("reconstruct", help="PBDW estimate from measurements")
    p.add_argument("--basis", required=True)
    p.add_argument("--wspace", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep-n", help="PBDW error against the reduced dimension")
    p.add_argument("--basis", required=True)
    p.add_argument("--wspace", required=True)
    p.add_argument("--snaps", nargs="+", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--mode", choices=("ms", "wc"), default="ms")
    p.add_argument("--n-max", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("transport", help="transport a basis to another geometry")
    p.add_argument("--src-geom", required=True)
    p.add_argument("--dst-geom", required=True)
    p.add_argument("--src-mesh", required=True)
    p.add_argument("--dst-mesh", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-piola", action="store_true")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("distmat", help="pairwise squared manifold distances")
    p.add_argument("--meshes", nargs="+", required=True)
    p.add_argument("--bases", nargs="+", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distmat)

    p = sub.add_parser("mds", help="classical MDS of a distance matrix")
    p.add_argument("--dist", required=True)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser("fit-embedding", help="voxel-to-embedding least-squares map")
    p.add_argument("--mds", required=True)
    p.add_argument("--geoms", nargs="+", required=True)
    p.add_argument("--spacing", type=float, default=0.05)
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_embedding)

    p = sub.add_parser("best-template", help="select a template for a geometry")
    p.add_argument("--geom", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_best_template)

    p = sub.add_parser("train", help="offline training of the template atlas")
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="online reconstruction on a new geometry")
    p.add_argument("--atlas", required=True)
    p.add_argument("--geom", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mesh-out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("benchmark", help="error curves and template ranking on test geometries")
    p.add_argument("--atlas", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ShapePBDWError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
