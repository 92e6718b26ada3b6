"""Per-mode 1D operators: weak-form assembly of Delta and D^2.

Everything here reduces a separated mode nu to a symmetric tridiagonal
stiffness matrix against a diagonal mass matrix on a uniform grid.

The scalar Laplacian mode is the form

    integral ( u' v' f  +  nu^2 u v / f ) P dt .

The squared Dirac operator splits into two half-spinor blocks.  Each block
is the form |A_mu u|^2 against the weighted measure, with the first-order
factor

    A_mu = d/dt + f'/(2f) + mu/f ,      mu in {+nu, -nu} ,

assembled as a sum of per-element squares (midpoint coefficients), which
makes the stiffness symmetric positive semidefinite by construction.

Boundary treatment.  Regular boundary circles and cusp truncations get a
Dirichlet ghost node (the Friedrichs condition).  At a singular end where
f ~ c1 * r the local solutions of a block behave like r^gamma and
r^(-gamma) with gamma = 1/2 +- mu/c1 (|nu|/c1 for the scalar mode).  For
gamma != 0 the Dirichlet condition at the truncation point selects the
regular branch at polynomial cost O(delta^(2|gamma|)).  At gamma == 0 the
singular partner carries infinite energy, so no boundary condition is
needed there, while forcing a Dirichlet zero would only converge like
1/log(1/delta) (the point has zero capacity); those ends are therefore
left free.  This is what makes the truncated problems converge to the
Friedrichs extension at polynomial rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse

from . import geometry
from .errors import AssemblyError
from .spin import SpinStructure, mode_in_structure

KIND_LAPLACIAN = "laplacian_scalar"
KIND_DIRAC = "dirac_square"

DIRICHLET = "dirichlet"
FREE = "free"

_GAMMA_EPS = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform nodes strictly inside the window (a, b).

    Nodes sit at a + h, a + 2h, ..., b - h with h = (b - a)/(n + 1); the
    fenceposts a and b carry the implied Dirichlet zeros where a block is
    Dirichlet.  side_kinds records what each window side is cut from:
    'regular', 'singular' or 'cusp'.  side_slopes holds |f'| at singular
    surface ends (None elsewhere).
    """

    a: float
    b: float
    n: int
    side_kinds: tuple = ("regular", "regular")
    side_slopes: tuple = (None, None)

    def __post_init__(self):
        if not self.a < self.b:
            raise AssemblyError("grid window must have a < b")
        if self.n < 16:
            raise AssemblyError(f"grid needs n >= 16, got {self.n}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(1, self.n + 1)

    @property
    def midpoints(self) -> np.ndarray:
        t = self.nodes
        return 0.5 * (t[:-1] + t[1:])


def make_grid(surface, n: int, delta_ratio: float = 0.5,
              cusp_tail_rel: float = 1e-6) -> Grid:
    """Compute the solve window for a surface and lay down n nodes.

    Singular ends are truncated at distance delta = delta_ratio * h (the
    coupling keeps a single refinement parameter); cusp ends are cut where
    the remaining tail area drops below cusp_tail_rel of the cusp mass.
    """
    kinds = (geometry.end_kind(surface, "lower"),
             geometry.end_kind(surface, "upper"))
    bounds = [surface.t_min, surface.t_max]
    ratios = [0.0, 0.0]
    slopes = [None, None]
    for i, side in enumerate(("lower", "upper")):
        if kinds[i] == "singular":
            ratios[i] = delta_ratio
            slopes[i] = geometry.edge_slope(surface, side)
        elif kinds[i] == "cusp" and math.isinf(bounds[i]):
            if not isinstance(surface.warp, geometry.ExpCuspWarp) or i == 0:
                raise AssemblyError(
                    "an infinite end needs a decaying cusp profile")
            cut = math.log(1.0 / cusp_tail_rel)
            bounds[i] = surface.t_min + cut
    span = bounds[1] - bounds[0]
    if not (math.isfinite(span) and span > 0):
        raise AssemblyError(f"cannot grid the window {bounds}")
    h = span / (n + 1 + ratios[0] + ratios[1])
    a = bounds[0] + ratios[0] * h
    b = bounds[1] - ratios[1] * h
    return Grid(a=a, b=b, n=n, side_kinds=kinds, side_slopes=tuple(slopes))


@dataclass(frozen=True)
class MassMatrix:
    """Diagonal weights w_i = P f(t_i) h, trapezoid-corrected at ends.

    The correction halves the weight at a window side with no boundary
    element (a free side), so that sum(w) tracks the area of the grid span.
    """

    weights: np.ndarray

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise AssemblyError("mass weights must be positive")

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class Block:
    """One tridiagonal stiffness/mass pair of a reduced operator."""

    coef: float  # mu for a Dirac block, nu for the scalar mode
    diag: np.ndarray
    off: np.ndarray
    mass: MassMatrix
    bc: tuple  # (left, right), each DIRICHLET or FREE

    @property
    def n(self) -> int:
        return len(self.diag)

    def quad_form(self, v: np.ndarray) -> float:
        v = np.asarray(v)
        s = np.sum(self.diag * np.abs(v) ** 2)
        s += 2.0 * np.sum(np.real(self.off * v[:-1] * np.conj(v[1:])))
        return float(np.real(s))

    def mass_form(self, v: np.ndarray) -> float:
        return float(np.sum(self.mass.weights * np.abs(np.asarray(v)) ** 2))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out


@dataclass(frozen=True)
class ReducedOperator:
    """Self-adjoint reduced operator for one Fourier mode.

    kind is 'laplacian_scalar' (one block) or 'dirac_square' (two blocks;
    blocks[c] acts on spinor component c with coefficients (-nu, +nu)).
    """

    kind: str
    nu: float
    period: float
    grid: Grid
    blocks: tuple

    @property
    def size(self) -> int:
        return sum(b.n for b in self.blocks)

    def stiffness_dense(self) -> np.ndarray:
        mats = []
        for b in self.blocks:
            m = np.diag(b.diag) + np.diag(b.off, 1) + np.diag(b.off, -1)
            mats.append(m)
        out = np.zeros((self.size, self.size))
        at = 0
        for m in mats:
            out[at:at + len(m), at:at + len(m)] = m
            at += len(m)
        return out

    def mass_dense(self) -> np.ndarray:
        return np.diag(np.concatenate([b.mass.weights for b in self.blocks]))


@dataclass
class Section:
    """Grid samples of a scalar function or 2-component spinor.

    values has shape (n,) for scalars and (2, n) for spinors; spinor
    component c matches ReducedOperator.blocks[c].
    """

    kind: str
    nu: float
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        want = (self.grid.n,) if self.kind == KIND_LAPLACIAN else (2, self.grid.n)
        if self.values.shape != want:
            raise AssemblyError(
                f"section shape {self.values.shape}, expected {want}")
        if not np.all(np.isfinite(self.values)):
            raise AssemblyError("section has non-finite entries")

    def components(self):
        return [self.values] if self.kind == KIND_LAPLACIAN else list(self.values)


def _singular_gamma(kind: str, side: str, c1: float, coef: float) -> float:
    if kind == KIND_LAPLACIAN:
        return abs(coef) / c1
    return 0.5 + coef / c1 if side == "lower" else 0.5 - coef / c1


def block_boundary_conditions(kind: str, coef: float, grid: Grid) -> tuple:
    """Dirichlet everywhere except limit-point singular ends (gamma == 0)."""
    out = []
    for i, side in enumerate(("lower", "upper")):
        if grid.side_kinds[i] != "singular":
            out.append(DIRICHLET)
            continue
        gamma = _singular_gamma(kind, side, grid.side_slopes[i], coef)
        out.append(FREE if abs(gamma) < _GAMMA_EPS else DIRICHLET)
    return tuple(out)


def _check_positive(f_vals, what: str):
    if np.any(~np.isfinite(f_vals)) or np.any(f_vals <= 0):
        raise AssemblyError(f"warp must be strictly positive on the {what}")


def _mass_weights(surface, grid: Grid, bc: tuple) -> MassMatrix:
    f_nodes = np.asarray(surface.f(grid.nodes), dtype=float)
    _check_positive(f_nodes, "grid nodes")
    w = surface.period * f_nodes * grid.h
    if bc[0] == FREE:
        w = w.copy()
        w[0] *= 0.5
    if bc[1] == FREE:
        w = w.copy()
        w[-1] *= 0.5
    return MassMatrix(weights=w)


def _assemble_block(surface, grid: Grid, kind: str, coef: float,
                    bc: tuple) -> Block:
    h = grid.h
    P = surface.period
    t = grid.nodes
    mids = grid.midpoints
    fm = np.asarray(surface.f(mids), dtype=float)
    _check_positive(fm, "element midpoints")
    diag = np.zeros(grid.n)
    off = np.zeros(grid.n - 1)
    w_e = P * fm * h
    if kind == KIND_DIRAC:
        am = np.asarray(surface.fprime(mids), dtype=float) / (2.0 * fm) + coef / fm
        bL = -1.0 / h + 0.5 * am
        bR = 1.0 / h + 0.5 * am
        diag[:-1] += w_e * bL * bL
        diag[1:] += w_e * bR * bR
        off += w_e * bL * bR
    else:
        diag[:-1] += w_e / h ** 2
        diag[1:] += w_e / h ** 2
        off -= w_e / h ** 2
    # boundary elements carry the implied Dirichlet zero at the fencepost
    if bc[0] == DIRICHLET:
        m = grid.a + 0.5 * h
        fb = float(surface.f(m))
        _check_positive(np.array([fb]), "lower boundary element")
        if kind == KIND_DIRAC:
            ab = float(surface.fprime(m)) / (2.0 * fb) + coef / fb
            diag[0] += P * fb * h * (1.0 / h + 0.5 * ab) ** 2
        else:
            diag[0] += P * fb / h
    if bc[1] == DIRICHLET:
        m = grid.b - 0.5 * h
        fb = float(surface.f(m))
        _check_positive(np.array([fb]), "upper boundary element")
        if kind == KIND_DIRAC:
            ab = float(surface.fprime(m)) / (2.0 * fb) + coef / fb
            diag[-1] += P * fb * h * (-1.0 / h + 0.5 * ab) ** 2
        else:
            diag[-1] += P * fb / h
    mass = _mass_weights(surface, grid, bc)
    if kind == KIND_LAPLACIAN and coef != 0.0:
        f_nodes = np.asarray(surface.f(t), dtype=float)
        pot = P * grid.h * coef ** 2 / f_nodes
        if bc[0] == FREE:
            pot[0] *= 0.5
        if bc[1] == FREE:
            pot[-1] *= 0.5
        diag += pot
    return Block(coef=coef, diag=diag, off=off, mass=mass, bc=bc)


def assemble_laplacian(surface, nu: float, grid: Grid) -> ReducedOperator:
    """Mode-nu scalar Laplacian as a (stiffness, mass) pair."""
    bc = block_boundary_conditions(KIND_LAPLACIAN, nu, grid)
    block = _assemble_block(surface, grid, KIND_LAPLACIAN, float(nu), bc)
    return ReducedOperator(kind=KIND_LAPLACIAN, nu=float(nu),
                           period=surface.period, grid=grid, blocks=(block,))


def assemble_dirac_square(surface, spin: SpinStructure, nu: float,
                          grid: Grid) -> ReducedOperator:
    """Mode-nu D^2 as the direct sum of its two half-spinor blocks."""
    if not isinstance(spin, SpinStructure):
        raise AssemblyError("dirac assembly needs a SpinStructure")
    if not mode_in_structure(nu, spin, surface.period):
        raise AssemblyError(
            f"mode {nu} is not on the {spin.value} spinor lattice "
            f"for period {surface.period}")
    blocks = []
    for mu in (-float(nu), +float(nu)):
        bc = block_boundary_conditions(KIND_DIRAC, mu, grid)
        blocks.append(_assemble_block(surface, grid, KIND_DIRAC, mu, bc))
    return ReducedOperator(kind=KIND_DIRAC, nu=float(nu),
                           period=surface.period, grid=grid,
                           blocks=tuple(blocks))


def rayleigh_quotient(op: ReducedOperator, phi: Section) -> float:
    """(stiffness phi, phi) / (mass phi, phi); an upper bound for the tone."""
    if phi.kind != op.kind:
        raise AssemblyError(
            f"section kind {phi.kind} does not match operator {op.kind}")
    comps = phi.components()
    num = sum(b.quad_form(v) for b, v in zip(op.blocks, comps))
    den = sum(b.mass_form(v) for b, v in zip(op.blocks, comps))
    if den <= 0:
        raise AssemblyError("section has zero norm")
    return num / den


def apply_block_midpoint(surface, mu: float, grid: Grid, values) -> tuple:
    """(A_mu u) at interior element midpoints, plus the averaged u there.

    Returns (midpoints, A_mu u, u averages, element weights).  Boundary
    elements are excluded, so the result is independent of the block bc.
    """
    u = np.asarray(values)
    mids = grid.midpoints
    fm = np.asarray(surface.f(mids), dtype=float)
    am = np.asarray(surface.fprime(mids), dtype=float) / (2.0 * fm) + mu / fm
    du = (u[1:] - u[:-1]) / grid.h
    ua = 0.5 * (u[1:] + u[:-1])
    w_e = surface.period * fm * grid.h
    return mids, du + am * ua, ua, w_e


def apply_block_forward(surface, mu: float, grid: Grid, values) -> np.ndarray:
    """First-order node realization of A_mu with a ghost zero past the end.

    (A u)_i = (u_{i+1} - u_i)/h + a(t_i) u_i.  This is the discrete
    square-root factor used by the product-rule and cutoff diagnostics; it
    is consistent of order one, which is exactly what those checks probe.
    """
    u = np.asarray(values)
    t = grid.nodes
    f = np.asarray(surface.f(t), dtype=float)
    _check_positive(f, "grid nodes")
    a = np.asarray(surface.fprime(t), dtype=float) / (2.0 * f) + mu / f
    ext = np.concatenate([u, [0.0]])
    return (ext[1:] - ext[:-1]) / grid.h + a * u


def dirac_energy(surface, op: ReducedOperator, phi: Section) -> float:
    """||D phi||^2 over the open window (interior elements only)."""
    if op.kind != KIND_DIRAC:
        raise AssemblyError("dirac_energy needs a dirac_square operator")
    total = 0.0
    for block, comp in zip(op.blocks, phi.components()):
        _, au, _, w_e = apply_block_midpoint(surface, block.coef, op.grid, comp)
        total += float(np.sum(w_e * np.abs(au) ** 2))
    return total


def bochner_gradient_energy(surface, op: ReducedOperator,
                            phi: Section) -> float:
    """||D phi||^2 - (K_spinor phi, phi): the connection energy.

    K_spinor = scal/4 is evaluated per node, so the spin connection never
    needs to be assembled; the value is a squared norm up to discretization
    error and must stay >= -solver tolerance wherever scal >= 0.
    """
    if phi.kind != KIND_DIRAC or op.kind != KIND_DIRAC:
        raise AssemblyError("bochner energy is defined for spinor sections")
    kap = geometry.gauss_curvature(surface, op.grid.nodes) / 2.0
    curv = 0.0
    for block, comp in zip(op.blocks, phi.components()):
        curv += float(np.sum(block.mass.weights * kap * np.abs(comp) ** 2))
    return dirac_energy(surface, op, phi) - curv


def leibniz_defect(surface, spin, nu: float, grid: Grid,
                   fmul: Section, phi: Section) -> float:
    """Discrete L2 norm of D(f phi) - grad f . phi - f D phi.

    Uses the first-order node operator and the forward-difference gradient
    of the sampled multiplier; the defect is O(h) under refinement with
    leading term h * f' phi', and vanishes identically for constant f.
    """
    if fmul.kind != KIND_LAPLACIAN:
        raise AssemblyError("multiplier must be a scalar section")
    if phi.kind != KIND_DIRAC:
        raise AssemblyError("phi must be a spinor section")
    fv = np.asarray(fmul.values, dtype=float)
    h = grid.h
    df = (fv[1:] - fv[:-1]) / h
    total = 0.0
    w = _mass_weights(surface, grid, (DIRICHLET, DIRICHLET)).weights
    for comp in phi.components():
        u = np.asarray(comp)
        dfu = (fv[1:] * u[1:] - fv[:-1] * u[:-1]) / h
        du = (u[1:] - u[:-1]) / h
        defect = dfu - df * u[:-1] - fv[:-1] * du
        total += float(np.sum(w[:-1] * np.abs(defect) ** 2))
    return math.sqrt(total)


def dump_operator(op: ReducedOperator, stiffness_path, mass_path=None):
    """Write the pair in MatrixMarket coordinate format (debug aid)."""
    s = scipy.sparse.csr_matrix(op.stiffness_dense())
    scipy.io.mmwrite(str(stiffness_path), s, symmetry="symmetric")
    if mass_path is not None:
        m = scipy.sparse.csr_matrix(op.mass_dense())
        scipy.io.mmwrite(str(mass_path), m, symmetry="symmetric")
