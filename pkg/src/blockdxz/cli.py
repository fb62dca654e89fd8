"""Command-line surface.

Exit codes: 0 success (converged / verification passed), 2 valid run with a
negative outcome (not converged, verification failed), 64 usage error,
65 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blocksinkhorn import (
    DxzDecomposition,
    IterationConfig,
    decompose,
    verify_decomposition,
)
from .matcore import BlockPartition, haar_random_unitary, load_matrix, save_matrix, RandomSpec
from .permdecomp import Permutation, perm_dxz
from .polar import PolarConfig
from .structure import biunitary_from_dxz, conjugate_decompose, is_block_circulant, normalize_biunitary

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64
EXIT_DATA = 65


class _UsageError(Exception):
    pass


class _DataError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    input_digest: str = ""
    partition: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    psi_trace: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    converged: bool = True
    wall_time_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(path) -> np.ndarray:
    try:
        return load_matrix(path)
    except (OSError, ValueError) as exc:
        raise _DataError(str(exc)) from exc


def _load_unitary(path) -> np.ndarray:
    mat = _load(path)
    if mat.shape[0] != mat.shape[1]:
        raise _DataError(f"{path}: matrix is not square")
    if float(np.linalg.norm(mat.conj().T @ mat - np.eye(mat.shape[0]))) > 1e-8:
        raise _DataError(f"{path}: matrix is not unitary within 1e-8")
    return mat


def _partition(n: int, m: int) -> BlockPartition:
    try:
        return BlockPartition(n, m)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _iteration_config(args) -> IterationConfig:
    try:
        return IterationConfig(
            max_iter=args.max_iter,
            psi_tol=args.psi_tol,
            polar=PolarConfig(newton_iters=args.polar_iters),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _config_dict(cfg: IterationConfig) -> dict:
    return {
        "max_iter": cfg.max_iter,
        "psi_tol": cfg.psi_tol,
        "polar_iters": cfg.polar.newton_iters,
    }


def _format_complex(value: complex) -> str:
    return f"{value.real:+.4f}{value.imag:+.4f}i"

def _print_matrix(mat: np.ndarray, label: str):
    print(label)
    for row in mat:
        print("  " + "  ".join(_format_complex(v) for v in row))


def _verify_tolerance(dec: DxzDecomposition) -> float:
    # line-sum residuals scale like sqrt(psi/n), so a pure multiple of the
    # final psi would be too tight right after convergence
    psi_final = max(dec.psi_trace[-1][1], 0.0)
    return max(1e-8, 10.0 * psi_final, 10.0 * (psi_final / dec.partition.n) ** 0.5)


def _decomposition_report(args, u, dec: DxzDecomposition, started: float) -> RunReport:
    verification = verify_decomposition(u, dec, _verify_tolerance(dec))
    return RunReport(
        command=" ".join(sys.argv[1:]) if args.echo is None else args.echo,
        input_digest=_digest(args.input),
        partition={"n": dec.partition.n, "m": dec.partition.m, "r": dec.partition.r, "q": dec.partition.q},
        config=_config_dict(_iteration_config(args)),
        psi_trace=[[t, value] for t, value in dec.psi_trace],
        residuals=verification.as_dict(),
        converged=dec.converged,
        wall_time_s=time.perf_counter() - started,
    )


def _emit_report(args, report: RunReport):
    if args.json:
        print(report.to_json())
    else:
        final_t, final_psi = report.psi_trace[-1] if report.psi_trace else (0, 0.0)
        print(f"converged: {report.converged} after {final_t} iterations, psi = {final_psi:.3e}")
        print(f"reconstruction residual: {report.residuals.get('reconstruction', 0.0):.3e}")


def cmd_decompose(args) -> int:
    started = time.perf_counter()
    u = _load_unitary(args.input)
    _partition(u.shape[0], args.m)
    dec = decompose(u, args.m, _iteration_config(args))
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    save_matrix(outdir / "D.json", dec.D)
    save_matrix(outdir / "X.json", dec.X)
    save_matrix(outdir / "Z.json", dec.Z)
    report = _decomposition_report(args, u, dec, started)
    (outdir / "report.json").write_text(report.to_json())
    _emit_report(args, report)
    return EXIT_OK if dec.converged else EXIT_NOT_CONVERGED


def cmd_trace(args) -> int:
    u = _load_unitary(args.input)
    _partition(u.shape[0], args.m)
    cfg = IterationConfig(max_iter=args.max_iter, psi_tol=args.psi_tol,
                          polar=PolarConfig(newton_iters=args.polar_iters))
    dec = decompose(u, args.m, cfg)
    print(f"  t  psi (m={args.m})")
    for t, value in dec.psi_trace:
        print(f"{t:3d}  {value:.3f}")
    return EXIT_OK if dec.converged else EXIT_NOT_CONVERGED


def cmd_verify(args) -> int:
    u = _load(args.u)
    d = _load(args.d)
    x = _load(args.x)
    z = _load(args.z)
    p = _partition(u.shape[0] if u.ndim == 2 else 0, args.m)
    dec = DxzDecomposition(D=d, X=x, Z=z, partition=p)
    try:
        report = verify_decomposition(u, dec, args.tol)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    if args.json:
        print(json.dumps(report.as_dict(), indent=2))
    else:
        for key, value in report.as_dict().items():
            print(f"{key}: {value}")
    return EXIT_OK if report.passed else EXIT_NOT_CONVERGED


def cmd_perm(args) -> int:
    try:
        perm = Permutation.from_string(" ".join(args.perm))
        _partition(perm.n, args.m)
        dec = perm_dxz(perm, args.m)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    for label, mat in (("D", dec.D), ("X", dec.X), ("Z", dec.Z)):
        print(f"{label} =")
        for row in mat.real.astype(int):
            print("  " + " ".join(str(v) for v in row))
    exact = bool(np.array_equal(dec.D @ dec.X @ dec.Z, perm.to_matrix()))
    print(f"product check D X Z = P: {'exact' if exact else 'FAILED'}")
    if args.output:
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        save_matrix(outdir / "D.json", dec.D)
        save_matrix(outdir / "X.json", dec.X)
        save_matrix(outdir / "Z.json", dec.Z)
    return EXIT_OK if exact else EXIT_NOT_CONVERGED


def cmd_random(args) -> int:
    if args.n < 1:
        raise _UsageError("n must be >= 1")
    save_matrix(args.output, haar_random_unitary(RandomSpec(args.n, args.seed)))
    print(args.output)
    return EXIT_OK


def cmd_biunitary(args) -> int:
    u = _load_unitary(args.input)
    _partition(u.shape[0], args.m)
    dec = decompose(u, args.m, _iteration_config(args))
    v, w = normalize_biunitary(*biunitary_from_dxz(dec))
    residual = float(np.linalg.norm(u @ v.stacked - w.stacked))
    _print_matrix(v.stacked, "V =")
    _print_matrix(w.stacked, "W =")
    print(f"residual |U V - W|_F = {residual:.3e}")
    return EXIT_OK if dec.converged else EXIT_NOT_CONVERGED


def cmd_conjugate(args) -> int:
    started = time.perf_counter()
    u = _load_unitary(args.input)
    p = _partition(u.shape[0], args.m)
    conj = conjugate_decompose(u, args.m, _iteration_config(args))
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    save_matrix(outdir / "C.json", conj.C)
    save_matrix(outdir / "A.json", conj.A)
    save_matrix(outdir / "Y.json", conj.Y)
    mid = np.zeros((p.n, p.n), dtype=complex)
    mid[: p.m, : p.m] = np.eye(p.m)
    mid[p.m :, p.m :] = conj.A
    residuals = {
        "reconstruction": float(np.linalg.norm(conj.C @ mid @ conj.Y - u)),
        "c_circulant": bool(is_block_circulant(conj.C, p)),
        "y_circulant": bool(is_block_circulant(conj.Y, p)),
    }
    report = RunReport(
        command=" ".join(sys.argv[1:]) if args.echo is None else args.echo,
        input_digest=_digest(args.input),
        partition={"n": p.n, "m": p.m, "r": p.r, "q": p.q},
        config=_config_dict(_iteration_config(args)),
        residuals=residuals,
        converged=conj.converged,
        wall_time_s=time.perf_counter() - started,
    )
    (outdir / "report.json").write_text(report.to_json())
    if args.json:
        print(report.to_json())
    else:
        print(f"converged: {conj.converged} after {conj.iterations_used} iterations")
        print(f"reconstruction residual: {residuals['reconstruction']:.3e}")
        print(f"C block-circulant: {residuals['c_circulant']}, Y block-circulant: {residuals['y_circulant']}")
    return EXIT_OK if conj.converged else EXIT_NOT_CONVERGED


def _add_iteration_flags(sub):
    sub.add_argument("--max-iter", type=int, default=200)
    sub.add_argument("--psi-tol", type=float, default=1e-6)
    sub.add_argument("--polar-iters", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockdxz",
        description="Block DXZ decomposition toolkit for unitary matrices (CMAT-JSON files)",
    )
    parser.add_argument("--echo", help=argparse.SUPPRESS, default=None)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("decompose", help="decompose a unitary into D, X, Z")
    s.add_argument("input")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--output", "-o", default=".")
    s.add_argument("--json", action="store_true")
    _add_iteration_flags(s)
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("trace", help="print the psi progress table")
    s.add_argument("input")
    s.add_argument("--m", type=int, required=True)
    _add_iteration_flags(s)
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("verify", help="check a claimed decomposition")
    s.add_argument("u")
    s.add_argument("d")
    s.add_argument("x")
    s.add_argument("z")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("perm", help="exact decomposition of a permutation")
    s.add_argument("perm", nargs="+", help='one-line notation, e.g. "5 1 2 4 6 3"')
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--output", "-o", default=None)
    s.set_defaults(func=cmd_perm)

    s = sub.add_parser("random", help="write a seeded Haar-random unitary")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", "-o", required=True)
    s.set_defaults(func=cmd_random)

    s = sub.add_parser("biunitary", help="extract the biunitary vector pair")
    s.add_argument("input")
    s.add_argument("--m", type=int, required=True)
    _add_iteration_flags(s)
    s.set_defaults(func=cmd_biunitary)

    s = sub.add_parser("conjugate", help="circulant-conjugate decomposition")
    s.add_argument("input")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--output", "-o", default=".")
    s.add_argument("--json", action="store_true")
    _add_iteration_flags(s)
    s.set_defaults(func=cmd_conjugate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (_DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def run():
    raise SystemExit(main())


if __name__ == "__main__":
    run()
