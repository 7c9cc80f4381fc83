"""Command-line driver.

    fe2hom <mode> --config run.yaml --out results/ [--threads N]

Exit codes: 0 success, 2 configuration error, 3 macro non-convergence,
4 RVE or linear-solver failure.  ``FE2HOM_THREADS`` overrides the thread
count of the config file; ``--threads`` overrides both.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import CORNERS, MODES, RunConfig, parse_config
from .errors import ConfigError, ConvergenceError, MeshError, SolverError
from .fem import DIM
from .fsi import (
    FsiMaterialPoint,
    FsiRveModel,
    MacroHydroInput,
    coupled_tangent,
    fd_check,
    homogenize_biphasic,
    solve_fsi,
)
from .io import (
    fmt,
    write_labeled_matrix_csv,
    write_log_csv,
    write_manifest,
    write_stress_csv,
    write_tangent_csv,
    write_vtk,
)
from .macro import (
    LoadStep,
    MacroProblem,
    edge_dofs,
    edge_traction,
    gauss_point_positions,
    run_load_steps,
)
from .mesh import gen_grid, tag_phases, write_mesh
from .rve import RveModel, hill_mandel_residual, macro_tangent, solve_rve

log = logging.getLogger("fe2hom")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_SOLVER = 0, 2, 3, 4
THREADS_ENV = "FE2HOM_THREADS"


def build_rve_mesh(cfg: RunConfig):
    r = cfg.rve
    return tag_phases(gen_grid(r.nx, r.ny, r.lx, r.ly), r.microstructure)


def build_rve(cfg: RunConfig) -> RveModel:
    return RveModel(build_rve_mesh(cfg), cfg.materials, cfg.rve.bc, cfg.rve.quadrature, cfg.cache_dir)


def build_fsi(cfg: RunConfig) -> FsiRveModel:
    f = cfg.fsi
    return FsiRveModel(build_rve_mesh(cfg), cfg.materials[0], f.gamma, f.viscosity, f.tau, cfg.rve.quadrature)


def _constraint_dofs(mesh, c) -> list[int]:
    if c.where in CORNERS:
        node = mesh.boundary.corners[CORNERS.index(c.where)]
        return [DIM * node + c.component]
    return edge_dofs(mesh, c.where, c.component)


def build_macro(cfg: RunConfig) -> MacroProblem:
    mc = cfg.macro
    mesh = gen_grid(mc.nx, mc.ny, mc.lx, mc.ly)
    supports = {d: 0.0 for c in mc.supports for d in _constraint_dofs(mesh, c)}
    steps = []
    for s in mc.load_program:
        f = np.zeros(DIM * mesh.n_nodes)
        for edge, t in s.traction.items():
            f += edge_traction(mesh, edge, t)
        disp = {d: c.value for c in s.displacement for d in _constraint_dofs(mesh, c)}
        steps.append(LoadStep(forces=f, displacements=disp))
    kw = dict(gauss_order=mc.gauss_order, tol=cfg.tol, max_iter=cfg.max_iter, threads=cfg.threads)
    if not cfg.is_fsi:
        return MacroProblem.uniform(mesh, build_rve(cfg), supports, steps, **kw)
    model = build_fsi(cfg)
    tmp = MacroProblem.uniform(mesh, None, supports, steps, **kw)
    Xg = gauss_point_positions(tmp)
    points = [
        [FsiMaterialPoint(model, mc.pressure_p0 + mc.pressure_grad @ x, mc.pressure_grad) for x in row]
        for row in Xg
    ]
    return MacroProblem(mesh, points, supports, steps, **kw)


def _run_rve_tangent(cfg, out: Path) -> list[str]:
    rve = build_rve(cfg)
    C = macro_tangent(rve)
    write_tangent_csv(C, out / "tangent.csv")
    write_mesh(rve.mesh, out / "rve_mesh.txt")
    print(f"rve-tangent: {C.size} components written (bc={rve.mode}, V0={fmt(rve.volume)})")
    return ["tangent.csv", "rve_mesh.txt"]


def _run_rve_stress(cfg, out: Path) -> list[str]:
    rve = build_rve(cfg)
    sol = solve_rve(rve, cfg.load.F_M)
    dF = cfg.load.F_M - np.eye(DIM)
    hm = hill_mandel_residual(sol, dF, rve)
    write_stress_csv({"P_M": sol.P_M}, out / "stress.csv")
    write_vtk(rve.mesh, out / "rve.vtk", "rve displacement", point_vectors={"displacement": sol.u})
    write_mesh(rve.mesh, out / "rve_mesh.txt")
    print(f"rve-stress: P_M = {sol.P_M.ravel().tolist()} hill-mandel residual {hm:.3e}")
    return ["stress.csv", "rve.vtk", "rve_mesh.txt"]


def _run_fe2(cfg, out: Path) -> list[str]:
    problem = build_macro(cfg)
    rows: list = []
    files = ["log.csv"]
    try:
        history = run_load_steps(problem, log_rows=rows)
    finally:
        write_log_csv(rows, out / "log.csv")
    mesh = problem.mesh
    for state in history:
        name = f"step_{state.step:03d}.vtk"
        write_vtk(
            mesh,
            out / name,
            f"fe2 step {state.step}",
            point_vectors={"displacement": state.u},
            cell_tensors={"P_M": state.P.mean(axis=1)},
        )
        files.append(name)
    if not history:
        write_vtk(mesh, out / "step_000.vtk", "fe2 reference", point_vectors={"displacement": np.zeros(DIM * mesh.n_nodes)})
        files.append("step_000.vtk")
    final = history[-1].u if history else np.zeros(DIM * mesh.n_nodes)
    with open(out / "displacements.csv", "w") as fh:
        fh.write("node,x,y,ux,uy\n")
        for n, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{n},{fmt(x)},{fmt(y)},{fmt(final[2 * n])},{fmt(final[2 * n + 1])}\n")
    files.append("displacements.csv")
    print(f"fe2-run: {len(history)} steps converged, {len(rows)} Newton iterations")
    return files


def _run_fsi(cfg, out: Path) -> list[str]:
    model = build_fsi(cfg)
    ld = cfg.load
    inp = MacroHydroInput(ld.F_M, ld.p_c, ld.grad_p, ld.X_c)
    sol = solve_fsi(model, inp)
    st = homogenize_biphasic(sol, model)
    write_stress_csv(
        {"P_sM": st.P_sM, "P_fM": st.P_fM, "P_fM_fictitious": st.P_fM_fictitious, "P_mix": st.P_mix},
        out / "biphasic_stress.csv",
    )
    tan = coupled_tangent(model, ld.X_c)
    write_labeled_matrix_csv(tan.matrix, tan.row_labels, tan.col_labels, out / "coupled_tangent.csv")
    write_vtk(
        model.mesh,
        out / "fsi.vtk",
        "fluid-filled rve",
        point_vectors={"displacement": sol.u},
        point_scalars={"pressure": sol.p},
    )
    print(f"fsi-rve: P_sM = {st.P_sM.ravel().tolist()} P_fM = {None if st.P_fM is None else st.P_fM.ravel().tolist()}")
    return ["biphasic_stress.csv", "coupled_tangent.csv", "fsi.vtk"]


def _run_fd_check(cfg, out: Path) -> list[str]:
    model = build_fsi(cfg)
    err = fd_check(model, cfg.seed)
    ndir = coupled_tangent(model).matrix.shape[1]
    line = f"fd-check: max relative discrepancy {err:.3e} over {ndir} directions (seed {cfg.seed})"
    (out / "fd_check.txt").write_text(line + "\n")
    print(line)
    return ["fd_check.txt"]


RUNNERS = {
    "rve-tangent": _run_rve_tangent,
    "rve-stress": _run_rve_stress,
    "fe2-run": _run_fe2,
    "fsi-rve": _run_fsi,
    "fd-check": _run_fd_check,
}


def run(cfg: RunConfig, out_dir, threads: int | None = None) -> int:
    """Execute one configured run; returns the process exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = os.environ.get(THREADS_ENV)
    if threads is not None:
        cfg.threads = threads
    elif env:
        try:
            cfg.threads = max(1, int(env))
        except ValueError:
            print(f"error: {THREADS_ENV}={env!r} is not an integer", file=sys.stderr)
            return EXIT_CONFIG
    try:
        files = RUNNERS[cfg.mode](cfg, out)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        write_manifest(out, cfg.mode, cfg.raw, ["log.csv"], {"status": "non-convergence"})
        return EXIT_CONVERGENCE
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_manifest(out, cfg.mode, cfg.raw, files, {"status": "ok"})
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fe2hom", description="FE2 computational homogenization")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="YAML or JSON run configuration")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="concurrent gauss-point solves")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, args.mode)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
