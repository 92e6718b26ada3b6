"""Generalized eigensolves, mode sweeps, and refinement studies.

Solvers work on one tridiagonal block at a time after the diagonal-mass
congruence M^(-1/2) S M^(-1/2), which keeps the bandwidth.  The dense path
is LAPACK bisection on the tridiagonal pair; the Lanczos path is ARPACK
shift-invert with a deterministic start vector.  Fundamental tones come
from a pruned sweep over circle modes with Richardson extrapolation over
a geometric (h, delta) refinement sequence.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.linalg import eigh_tridiagonal

from . import geometry
from .errors import AssemblyError, ConvergenceError
from .operators import (
    KIND_DIRAC,
    KIND_LAPLACIAN,
    Grid,
    ReducedOperator,
    Section,
    assemble_dirac_square,
    assemble_laplacian,
    make_grid,
)
from .spin import SCALAR, enumerate_modes, mode_lower_bound_term

RESIDUAL_TOL = 1e-8
DENSE_MAX_N = 512


@dataclass(frozen=True)
class GridPolicy:
    """Refinement policy for tone computations.

    base_n is the coarsest node count; each of the `levels` refinement
    steps doubles it.  Singular-end truncation distances are tied to the
    spacing (delta = delta_ratio * h), so one geometric sequence refines h
    and delta together and a single estimated-order Richardson step
    extrapolates both.
    """

    base_n: int = 512
    levels: int = 3
    delta_ratio: float = 0.5
    cusp_tail_rel: float = 1e-6
    mode_cutoff: int = 8
    max_mode_cutoff: int = 64
    solver: str | None = None  # None = dense below DENSE_MAX_N, else lanczos

    def level_n(self, level: int) -> int:
        return self.base_n * 2 ** level


@dataclass
class EigenResult:
    """Low eigenpairs of one reduced operator."""

    eigenvalues: np.ndarray
    sections: list
    residuals: np.ndarray
    solver: str
    grid: Grid
    block_index: np.ndarray


@dataclass
class ToneResult:
    """Extrapolated fundamental tone of a mode sweep."""

    kind: str
    lambda_star: float
    nu_star: float
    error_bar: float
    per_mode: dict  # nu -> {"value", "error_bar", "order"} or {"pruned_at"}
    table: list  # per (nu, level): n, h, delta, value
    flags: list
    kernel_skipped: bool = False


@dataclass
class ProbeResult:
    """Eigenvalue counts below a threshold over nested windows."""

    threshold: float
    windows: list
    counts: list
    stable: bool


def _solve_block_dense(diag, off, scale, count, vecs):
    d = diag * scale * scale
    e = off * scale[:-1] * scale[1:]
    if vecs:
        vals, V = eigh_tridiagonal(d, e, select="i",
                                   select_range=(0, count - 1))
        return vals, V * scale[:, None]
    vals = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1),
                            eigvals_only=True)
    return vals, None


def _solve_block_lanczos(block, count, vecs):
    n = block.n
    S = scipy.sparse.diags(
        [block.off, block.diag, block.off], [-1, 0, 1], format="csc")
    M = scipy.sparse.diags([block.mass.weights], [0], format="csc")
    gersh = float(np.max((np.abs(block.diag)
                          + np.concatenate([[0.0], np.abs(block.off)])
                          + np.concatenate([np.abs(block.off), [0.0]]))
                         / block.mass.weights))
    sigma = -max(1e-12, 1e-6 * gersh)
    rng = np.random.default_rng(20240214)
    v0 = rng.standard_normal(n)
    try:
        vals, V = scipy.sparse.linalg.eigsh(
            S, k=count, M=M, sigma=sigma, which="LM", v0=v0, tol=0,
            maxiter=max(1000, 40 * count))
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"Lanczos did not converge for block size {n}: {exc}") from exc
    order = np.argsort(vals)
    return vals[order], (V[:, order] if vecs else None)


def _count_block_below(block, threshold: float) -> int:
    scale = 1.0 / np.sqrt(block.mass.weights)
    d = block.diag * scale * scale
    e = block.off * scale[:-1] * scale[1:]
    vals = eigh_tridiagonal(d, e, select="v",
                            select_range=(-1e300, threshold),
                            eigvals_only=True)
    return int(len(vals))


def smallest_eigenpairs(op: ReducedOperator, count: int,
                        solver: str | None = None) -> EigenResult:
    """The `count` lowest generalized eigenpairs of (stiffness, mass)."""
    if count < 1 or count > op.size - 2:
        raise AssemblyError(
            f"count must be in [1, {op.size - 2}], got {count}")
    if solver is None:
        solver = "dense" if max(b.n for b in op.blocks) <= DENSE_MAX_N \
            else "lanczos"
    if solver not in ("dense", "lanczos"):
        raise AssemblyError(f"unknown solver {solver!r}")
    per_block = min(count, min(b.n for b in op.blocks) - 2)
    per_block = max(per_block, 1)
    merged = []
    for bi, block in enumerate(op.blocks):
        scale = 1.0 / np.sqrt(block.mass.weights)
        if solver == "dense":
            vals, V = _solve_block_dense(block.diag, block.off, scale,
                                         per_block, vecs=True)
        else:
            vals, V = _solve_block_lanczos(block, per_block, vecs=True)
        for j, lam in enumerate(vals):
            merged.append((float(lam), bi, V[:, j]))
    merged.sort(key=lambda rec: (rec[0], rec[1]))
    merged = merged[:count]

    eigenvalues = np.array([rec[0] for rec in merged])
    block_index = np.array([rec[1] for rec in merged])
    sections = []
    residuals = []
    for lam, bi, vec in merged:
        block = op.blocks[bi]
        nrm = math.sqrt(block.mass_form(vec))
        vec = vec / nrm
        r = block.matvec(vec) - lam * block.mass.weights * vec
        residuals.append(float(np.linalg.norm(r)
                               / np.linalg.norm(block.mass.weights * vec)))
        if op.kind == KIND_DIRAC:
            full = np.zeros((2, op.grid.n))
            full[bi] = vec
            sections.append(Section(kind=KIND_DIRAC, nu=op.nu, grid=op.grid,
                                    values=full))
        else:
            sections.append(Section(kind=KIND_LAPLACIAN, nu=op.nu,
                                    grid=op.grid, values=vec))
    residuals = np.array(residuals)
    if np.any(residuals > RESIDUAL_TOL):
        raise ConvergenceError(
            f"eigenpair residual {residuals.max():.2e} above {RESIDUAL_TOL}")
    return EigenResult(eigenvalues=eigenvalues, sections=sections,
                       residuals=residuals, solver=solver, grid=op.grid,
                       block_index=block_index)


def richardson(seq) -> tuple:
    """Extrapolate a geometric refinement sequence; returns (value, bar, p).

    The convergence order is estimated from the data (singular-end
    truncations are not always second order), and the error bar is the
    distance from the last level to the extrapolated value.
    """
    seq = [float(x) for x in seq]
    if len(seq) == 1:
        return seq[0], abs(seq[0]) * 1e-3 + 1e-9, float("nan")
    if len(seq) == 2:
        return seq[1], abs(seq[1] - seq[0]) + 1e-14, float("nan")
    l0, l1, l2 = seq[-3:]
    d0, d1 = l0 - l1, l1 - l2
    if d1 == 0.0:
        return l2, 1e-14, float("inf")
    ratio = d0 / d1
    if ratio <= 1.0:
        return l2, abs(d0) + abs(d1) + 1e-14, float("nan")
    p = min(max(math.log2(ratio), 0.3), 4.0)
    val = l2 - d1 / (2 ** p - 1)
    return val, abs(val - l2) + 1e-14, p


def _assemble(surface, kind, spin, nu, grid):
    if kind == KIND_LAPLACIAN:
        return assemble_laplacian(surface, nu, grid)
    return assemble_dirac_square(surface, spin, nu, grid)


def _has_regular_end(surface) -> bool:
    return any(geometry.end_kind(surface, s) == "regular"
               for s in ("lower", "upper"))


def _mode_value(surface, kind, spin, nu, policy, take_second):
    """Per-level ground value of one mode and its extrapolation."""
    seq = []
    rows = []
    for level in range(policy.levels):
        n = policy.level_n(level)
        grid = make_grid(surface, n, delta_ratio=policy.delta_ratio,
                         cusp_tail_rel=policy.cusp_tail_rel)
        op = _assemble(surface, kind, spin, nu, grid)
        res = smallest_eigenpairs(op, 2 if take_second else 1,
                                  solver=policy.solver)
        value = float(res.eigenvalues[1] if take_second
                      else res.eigenvalues[0])
        seq.append(value)
        delta = policy.delta_ratio * grid.h \
            if "singular" in grid.side_kinds else 0.0
        rows.append({"nu": nu, "level": level, "n": n, "h": grid.h,
                     "delta": delta, "value": value})
    val, bar, order = richardson(seq)
    return val, bar, order, rows


def fundamental_tone(surface, kind: str, spin=None,
                     policy: GridPolicy = GridPolicy()) -> ToneResult:
    """min over circle modes of the extrapolated ground eigenvalue.

    For the scalar Laplacian on surfaces with no honest boundary circle
    (all ends singular or cusps) the constants survive in the form domain,
    so the nu = 0 ground is the kernel surrogate and the sweep reports the
    first nonzero eigenvalue instead; with a Dirichlet boundary present the
    kernel is empty and the plain minimum is returned.
    """
    if kind not in (KIND_LAPLACIAN, KIND_DIRAC):
        raise AssemblyError(f"unknown operator kind {kind!r}")
    if kind == KIND_DIRAC and spin is None:
        raise AssemblyError("dirac tone needs a spin structure")
    structure = SCALAR if kind == KIND_LAPLACIAN else spin
    kernel_skip = kind == KIND_LAPLACIAN and not _has_regular_end(surface)

    flags = []
    if any(geometry.end_kind(surface, s) == "cusp" for s in ("lower", "upper")):
        flags.append("cusp-truncated-upper-estimate")

    cutoff = policy.mode_cutoff
    modes = enumerate_modes(structure, surface.period, cutoff)
    pending = sorted({nu for nu in modes.frequencies if nu >= 0})
    probe_grid = make_grid(surface, policy.base_n,
                           delta_ratio=policy.delta_ratio,
                           cusp_tail_rel=policy.cusp_tail_rel)

    best = math.inf
    best_nu = math.nan
    best_bar = math.inf
    per_mode = {}
    table = []
    certified = False
    while True:
        for nu in pending:
            term = mode_lower_bound_term(nu, surface.warp, probe_grid)
            if best < math.inf and term > best:
                per_mode[nu] = {"pruned_at": term}
                continue
            take_second = kernel_skip and abs(nu) < 1e-12
            val, bar, order, rows = _mode_value(surface, kind, spin, nu,
                                                policy, take_second)
            per_mode[nu] = {"value": val, "error_bar": bar, "order": order}
            table.extend(rows)
            if val < best:
                best, best_nu, best_bar = val, nu, bar
        top = max(abs(nu) for nu in per_mode)
        top_term = mode_lower_bound_term(top, surface.warp, probe_grid)
        if best < math.inf and top_term > best:
            certified = True
            break
        if cutoff >= policy.max_mode_cutoff:
            break
        new_cutoff = min(2 * cutoff, policy.max_mode_cutoff)
        bigger = enumerate_modes(structure, surface.period, new_cutoff)
        pending = sorted({nu for nu in bigger.frequencies
                          if nu >= 0 and nu not in per_mode})
        cutoff = new_cutoff
    if not certified:
        flags.append("sweep-exhausted-without-pruning-certificate")
    return ToneResult(kind=kind, lambda_star=best, nu_star=abs(best_nu),
                      error_bar=best_bar, per_mode=per_mode, table=table,
                      flags=flags, kernel_skipped=kernel_skip)


def truncation_probe(surface, kind: str, spin, windows, threshold: float,
                     n_base: int = 512) -> ProbeResult:
    """Count eigenvalues below `threshold` on a nested window sequence.

    Stabilizing counts indicate purely discrete spectrum below the
    threshold (compact perturbations do not move the essential spectrum);
    counts that keep growing signal spectrum accumulating below it.
    All probe windows use Dirichlet walls and share one node spacing so the
    discrete spaces are genuinely nested.
    """
    windows = [(float(a), float(b)) for a, b in windows]
    for (a0, b0), (a1, b1) in zip(windows, windows[1:]):
        if a1 > a0 + 1e-12 or b1 < b0 - 1e-12:
            raise AssemblyError("probe windows must be nested and growing")
    structure = SCALAR if kind == KIND_LAPLACIAN else spin
    span0 = windows[0][1] - windows[0][0]
    h = span0 / (n_base + 1)
    modes = enumerate_modes(structure, surface.period, 32)
    counts = []
    for a, b in windows:
        n = max(16, int(round((b - a) / h)) - 1)
        grid = Grid(a=a, b=b, n=n)
        total = 0
        for nu in sorted({x for x in modes.frequencies if x >= 0}):
            term = mode_lower_bound_term(nu, surface.warp, grid)
            if term > threshold:
                continue
            op = _assemble(surface, kind, spin, nu, grid)
            c = sum(_count_block_below(blk, threshold) for blk in op.blocks)
            if nu > 1e-12:
                c *= 2  # modes +-nu carry identical spectra
            total += c
        counts.append(total)
    stable = len(counts) >= 2 and counts[-1] == counts[-2]
    return ProbeResult(threshold=threshold, windows=windows, counts=counts,
                       stable=stable)


def worker_count() -> int:
    """Worker cap for embarrassingly parallel sweeps (DIRACLAB_THREADS)."""
    try:
        return max(1, int(os.environ.get("DIRACLAB_THREADS", "1")))
    except ValueError:
        return 1
