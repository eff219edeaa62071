"""Command-line driver: ``verify-spectral``, ``solve`` and ``adapt``."""
from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import dense_oracle as oracle
from .cases import CAYLEY_3X3, JORDAN_3X3, jordan_filter
from .cluster_gap import estimate_cluster_gap
from .config import ConfigError, RunConfig, load_config
from .fem_core import FeSpace, FoslsResolvent, GalerkinResolvent, OperatorSpec, SingularSystemError
from .feast_solver import (
    DenseBackend,
    FeastNotConverged,
    NoSpectrumInContour,
    feast_iterate,
    hausdorff,
)
from .filters import ContourCircle, butterworth, cayley, inverse_image
from .mesh2d import (
    TriMesh,
    greedy_mark,
    read_mesh,
    refine,
    structured_lshape,
    structured_square,
    write_mesh,
)
from .source_estimators import FoslsEstimator, ResidualEstimator

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_NO_SPECTRUM = 3
EXIT_NOT_CONVERGED = 4
EXIT_SINGULAR = 5

CSV_HEADER = "ndofs,hausdorff,l2_eta,eta_max,round,dim_Eh"


# ---------------------------------------------------------------------------
# verify-spectral


def _check(name, ok, detail=""):
    return name, bool(ok), detail


def _checks_fixed():
    out = []
    f = jordan_filter()
    rA = oracle.apply_filter(JORDAN_3X3, f)
    expect = np.array([[-0.8, 0, 0], [0, -0.8, 0.64], [0, 0, -0.8]])
    out.append(_check("jordan-3x3 r(A)", np.abs(rA - expect).max() < 1e-12))
    roots = sorted(inverse_image(f, -0.8).roots, key=lambda z: z.real)
    out.append(
        _check("jordan-3x3 inverse image", np.allclose(roots, [-0.5, 0.5], atol=1e-10, rtol=0))
    )
    gap = oracle.verify_mapping_lemma(JORDAN_3X3, f, -0.8)
    out.append(_check("jordan-3x3 mapping lemma", gap < 1e-10, f"gap {gap:.2e}"))
    c = cayley()
    out.append(_check("cayley r(10-i)", abs(c(10 - 1j) - (5 - 1j) / 5) < 1e-12))
    out.append(_check("cayley r(10+i)", abs(c(10 + 1j) - (25 - 5j) / 26) < 1e-12))
    rC = oracle.apply_filter(CAYLEY_3X3, c)
    # superdiagonal entry of r(J) equals r'(lambda) = 2i / (lambda + i)^2
    deriv = 2j / (10 + 2j) ** 2
    out.append(_check("cayley r(A) superdiagonal", abs(rC[1, 2] - deriv) < 1e-12))
    gap = oracle.verify_mapping_lemma(CAYLEY_3X3, c, c(10 + 1j))
    out.append(_check("cayley mapping lemma", gap < 1e-10, f"gap {gap:.2e}"))
    return out


def _checks_random(seed, count):
    rng = np.random.default_rng(seed)
    out = []
    worst, mult_ok = 0.0, True
    for _ in range(count):
        A, f, mu = oracle.random_lemma_instance(rng)
        worst = max(worst, oracle.verify_mapping_lemma(A, f, mu))
        mult_ok &= oracle.multiplicity_sum_check(A, f, mu)
    out.append(_check(f"mapping lemma x{count}", worst < 1e-7, f"max gap {worst:.2e}"))
    out.append(_check(f"multiplicity sums x{count}", mult_ok))
    worst = 0.0
    for N in (2, 4, 8):
        for O in (0, 2 + 1j):
            for R in (1.0, 3.0):
                contour = ContourCircle(O, R, N)
                f = butterworth(contour)
                z = O + 2 * R * (rng.standard_normal(50) + 1j * rng.standard_normal(50))
                val = f(z)
                closed = 1 / (1 - ((z - O) / (R * contour.phase)) ** N)
                worst = max(worst, np.max(np.abs(val - closed) / (1 + np.abs(val))))
    out.append(_check("butterworth closed form", worst < 1e-10, f"max rel err {worst:.2e}"))
    worst = 0.0
    for _ in range(5):
        A, P_exact = _random_normal_cluster(rng)
        P = oracle.riesz_projector(A, ContourCircle(0, 1, 128))
        worst = max(worst, np.linalg.norm(P - P_exact, 2))
    out.append(_check("riesz projector", worst < 1e-8, f"max err {worst:.2e}"))
    return out


def _random_normal_cluster(rng, n=8):
    """Normal matrix with 3 eigenvalues in |z| < 0.5 and the rest in |z| > 1.5."""
    inner = 0.5 * np.sqrt(rng.random(3)) * np.exp(2j * np.pi * rng.random(3))
    outer = (1.5 + rng.random(n - 3)) * np.exp(2j * np.pi * rng.random(n - 3))
    lam = np.concatenate([inner, outer])
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    U, _ = np.linalg.qr(Z)
    A = U @ np.diag(lam) @ U.conj().T
    P = U[:, :3] @ U[:, :3].conj().T
    return A, P


def cmd_verify_spectral(args) -> int:
    if args.cases == "3x3":
        rA = oracle.apply_filter(JORDAN_3X3, jordan_filter())
        print("r(A) for the 3x3 Jordan example:")
        print(np.array2string(rA.real, precision=6, suppress_small=True))
        print("r(A) for the 3x3 Cayley example:")
        print(np.array2string(oracle.apply_filter(CAYLEY_3X3, cayley()), precision=6))
    checks = _checks_fixed() + _checks_random(args.seed, args.random)
    failed = [c for c in checks if not c[1]]
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    if failed:
        print(f"{len(failed)} check(s) failed: " + ", ".join(c[0] for c in failed))
        return EXIT_CHECK_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------
# problem setup shared by solve and adapt


def initial_mesh(cfg: RunConfig) -> TriMesh:
    if cfg.problem == "square":
        return structured_square(cfg.n)
    if cfg.problem == "lshape":
        return structured_lshape(cfg.n)
    return read_mesh(cfg.mesh_file)


def operator_spec(cfg: RunConfig) -> OperatorSpec:
    if cfg.potential == 0:
        return OperatorSpec()
    V = cfg.potential
    if cfg.potential_region == "all":
        return OperatorSpec(V)
    return OperatorSpec(lambda x, y: np.where(x < 0.5, V, 0.0))


def contour_of(cfg: RunConfig) -> ContourCircle:
    return ContourCircle(cfg.center, cfg.radius, cfg.nquad, phase_sign=cfg.phase_sign)


def square_references(contour: ContourCircle) -> tuple:
    """Dirichlet eigenvalues pi^2 (j^2 + k^2) of the unit square inside the contour."""
    top = int(math.sqrt((abs(contour.center) + contour.radius) / math.pi**2)) + 2
    vals = sorted(
        math.pi**2 * (j * j + k * k) for j in range(1, top) for k in range(1, top)
    )
    return tuple(v for v in vals if contour.contains(v))


def references_for(cfg: RunConfig, contour) -> tuple:
    if cfg.reference:
        return cfg.reference
    if cfg.problem == "square" and cfg.potential == 0:
        return square_references(contour)
    return ()


@dataclass
class RoundResult:
    ndofs: int
    ritz_values: np.ndarray
    dim: int
    estimate: object
    iterations: int


def solve_on_mesh(cfg: RunConfig, mesh: TriMesh, filt, contour) -> RoundResult:
    if cfg.estimator == "fosls":
        backend = FoslsResolvent(mesh)
        estimator = FoslsEstimator(filt, backend)
    else:
        space = FeSpace(mesh, cfg.degree)
        backend = GalerkinResolvent(space, operator_spec(cfg))
        estimator = ResidualEstimator(filt, backend)
    m = min(cfg.cluster_dim_hint + 2, backend.dof_count)
    res = feast_iterate(backend, filt, contour, m, cfg.seed, cfg.tol_feast, cfg.maxit)
    est = estimate_cluster_gap(res.basis, estimator, backend.gram())
    return RoundResult(backend.dof_count, res.ritz_values, res.dim, est, res.iterations)


def _fmt_complex(z) -> str:
    return f"{z.real:.12f}{z.imag:+.3e}i"


# ---------------------------------------------------------------------------
# solve


def _solve_matrix(args, cfg) -> int:
    A = np.loadtxt(args.matrix, dtype=complex, ndmin=2)
    contour = contour_of(cfg)
    backend = DenseBackend(A)
    m = min(cfg.cluster_dim_hint + 2, backend.dof_count)
    res = feast_iterate(backend, butterworth(contour), contour, m, cfg.seed, cfg.tol_feast, cfg.maxit)
    print(f"dim E_h     {res.dim}")
    print(f"iterations  {res.iterations}")
    for z in res.ritz_values:
        print(f"ritz        {_fmt_complex(z)}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = config_from_args(args)
    try:
        if args.matrix:
            return _solve_matrix(args, cfg)
        contour = contour_of(cfg)
        out = solve_on_mesh(cfg, initial_mesh(cfg), butterworth(contour), contour)
    except NoSpectrumInContour as exc:
        print(f"no spectrum in contour: {exc}")
        return EXIT_NO_SPECTRUM
    except FeastNotConverged as exc:
        print(f"not converged: {exc}")
        return EXIT_NOT_CONVERGED
    except SingularSystemError as exc:
        print(f"singular shifted system: {exc}")
        return EXIT_SINGULAR
    print(f"ndofs       {out.ndofs}")
    print(f"dim E_h     {out.dim}")
    print(f"iterations  {out.iterations}")
    for z in out.ritz_values:
        print(f"ritz        {_fmt_complex(z)}")
    print(out.estimate.report())
    return EXIT_OK


# ---------------------------------------------------------------------------
# adapt


def _row(ndofs, hd, est, rnd, dim) -> str:
    return f"{ndofs},{hd:.12e},{est.eta_l2:.12e},{est.eta_max:.12e},{rnd},{dim}"


def run_adapt(cfg: RunConfig, log=print) -> list:
    """SOLVE -> ESTIMATE -> MARK -> REFINE; returns the CSV rows written."""
    contour = contour_of(cfg)
    filt = butterworth(contour)
    refs = references_for(cfg, contour)
    prefix = cfg.output_prefix
    rows = []
    pending = None
    mesh = initial_mesh(cfg)
    with open(f"{prefix}_data.csv", "w") as fh:
        if not refs:
            fh.write("# hausdorff: distance to the next round's Ritz set (no reference values)\n")
        fh.write(CSV_HEADER + "\n")

        def emit(line):
            rows.append(line)
            fh.write(line + "\n")
            fh.flush()

        for rnd in range(cfg.max_rounds + (0 if refs else 1)):
            last_extra = not refs and rnd == cfg.max_rounds
            space_dofs = FeSpace(mesh, cfg.degree).dof_count
            if space_dofs > cfg.max_dofs:
                log(f"round {rnd}: {space_dofs} dofs exceed the cap {cfg.max_dofs}; stopping")
                break
            t0 = time.perf_counter()
            out = solve_on_mesh(cfg, mesh, filt, contour)
            if pending is not None:
                p_rnd, p_out = pending
                hd = hausdorff(p_out.ritz_values, out.ritz_values)
                emit(_row(p_out.ndofs, hd, p_out.estimate, p_rnd, p_out.dim))
                pending = None
            if last_extra:
                break
            write_mesh(mesh, f"{prefix}_mesh_{rnd}.txt")
            if refs:
                hd = hausdorff(out.ritz_values, refs)
                emit(_row(out.ndofs, hd, out.estimate, rnd, out.dim))
            else:
                pending = (rnd, out)
            log(
                f"round {rnd}: ndofs {out.ndofs}, dim {out.dim}, "
                f"eta_l2 {out.estimate.eta_l2:.3e}, {time.perf_counter() - t0:.2f}s"
            )
            if rnd + 1 < cfg.max_rounds or not refs:
                marks = greedy_mark(out.estimate.eta_local, cfg.theta)
                mesh = refine(mesh, marks)
    return rows


def cmd_adapt(args) -> int:
    cfg = config_from_args(args)
    try:
        run_adapt(cfg)
    except NoSpectrumInContour as exc:
        print(f"no spectrum in contour: {exc}")
        return EXIT_NO_SPECTRUM
    except FeastNotConverged as exc:
        print(f"not converged: {exc}")
        return EXIT_NOT_CONVERGED
    except SingularSystemError as exc:
        print(f"singular shifted system: {exc}")
        return EXIT_SINGULAR
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling

_OVERRIDES = {
    "problem": str,
    "mesh_file": str,
    "n": int,
    "degree": int,
    "estimator": str,
    "center": complex,
    "radius": float,
    "nquad": int,
    "phase_sign": int,
    "cluster_dim_hint": int,
    "theta": float,
    "max_rounds": int,
    "tol_feast": float,
    "maxit": int,
    "seed": int,
    "output_prefix": str,
    "max_dofs": int,
    "potential": complex,
    "potential_region": str,
}


def _add_run_options(p):
    p.add_argument("--config", help="key = value configuration file")
    for key, kind in _OVERRIDES.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=kind, default=None)
    p.add_argument(
        "--reference",
        default=None,
        help="comma-separated reference eigenvalues for the hausdorff column",
    )


def config_from_args(args) -> RunConfig:
    overrides = {k: getattr(args, k) for k in _OVERRIDES}
    if args.reference is not None:
        overrides["reference"] = tuple(
            complex(t.strip()) for t in args.reference.split(",") if t.strip()
        )
    if args.config:
        return load_config(args.config, overrides)
    values = {k: v for k, v in overrides.items() if v is not None}
    return RunConfig(**values).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clustergap",
        description="Rational-filter eigensolvers and eigenspace gap estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-spectral", help="run the dense filter/spectral checks")
    p.add_argument("--cases", choices=["3x3"], default=None, help="print the worked example")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random", type=int, default=200, help="number of random instances")
    p.set_defaults(func=cmd_verify_spectral)

    p = sub.add_parser("solve", help="one FEAST solve on a fixed mesh or dense matrix")
    _add_run_options(p)
    p.add_argument("--matrix", help="dense matrix text file (complex entries)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("adapt", help="adaptive refinement loop")
    _add_run_options(p)
    p.set_defaults(func=cmd_adapt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
