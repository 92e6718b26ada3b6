import math

import numpy as np
import pytest
import scipy.io

from diraclab.errors import AssemblyError
from diraclab.geometry import ConstantWarp, CosineWarp, WarpedSurface
from diraclab.operators import (
    DIRICHLET,
    FREE,
    KIND_DIRAC,
    KIND_LAPLACIAN,
    Grid,
    Section,
    assemble_dirac_square,
    assemble_laplacian,
    block_boundary_conditions,
    bochner_gradient_energy,
    dump_operator,
    leibniz_defect,
    make_grid,
    rayleigh_quotient,
)
from diraclab.eigensolve import smallest_eigenpairs
from diraclab.scenarios import cover_scenario, find_scenario
from diraclab.spin import SpinStructure

HALF_PI = math.pi / 2


def sphere():
    return WarpedSurface(warp=CosineWarp(), t_min=-HALF_PI, t_max=HALF_PI,
                         period=2 * math.pi)


def cylinder(length=5.0):
    return WarpedSurface(warp=ConstantWarp(1.0), t_min=0.0, t_max=length,
                         period=2 * math.pi)


def test_dirichlet_string_spectrum():
    # classical spectrum j^2 on (0, pi); relative accuracy 1e-4 at N=512
    s = cylinder(math.pi)
    op = assemble_laplacian(s, 0.0, make_grid(s, 512))
    res = smallest_eigenpairs(op, 3)
    for j, lam in enumerate(res.eigenvalues, start=1):
        assert lam == pytest.approx(j * j, rel=1e-4)


def test_stiffness_exactly_symmetric():
    s = sphere()
    grid = make_grid(s, 64)
    for op in (assemble_laplacian(s, 1.0, grid),
               assemble_dirac_square(s, SpinStructure.BOUNDING, 0.5, grid)):
        dense = op.stiffness_dense()
        assert np.array_equal(dense, dense.T)


def test_mass_positive_and_tracks_span_area():
    s = cylinder(5.0)
    grid = make_grid(s, 256)
    op = assemble_laplacian(s, 0.0, grid)
    w = op.blocks[0].mass.weights
    assert np.all(w > 0)
    span_area = s.period * (grid.nodes[-1] - grid.nodes[0])
    assert abs(w.sum() - span_area) <= 3 * grid.h * s.period


def test_boundary_condition_rule_on_sphere():
    s = sphere()
    grid = make_grid(s, 64)
    # scalar: mode 0 is limit point at both poles, higher modes are not
    assert block_boundary_conditions(KIND_LAPLACIAN, 0.0, grid) == (FREE, FREE)
    assert block_boundary_conditions(KIND_LAPLACIAN, 1.0, grid) == \
        (DIRICHLET, DIRICHLET)
    # dirac block mu = +1/2: regular branch exponent 0 at the upper pole
    assert block_boundary_conditions(KIND_DIRAC, 0.5, grid) == \
        (DIRICHLET, FREE)
    assert block_boundary_conditions(KIND_DIRAC, -0.5, grid) == \
        (FREE, DIRICHLET)
    assert block_boundary_conditions(KIND_DIRAC, 1.5, grid) == \
        (DIRICHLET, DIRICHLET)


def test_boundary_condition_rule_on_cylinder_always_dirichlet():
    grid = make_grid(cylinder(), 64)
    for coef in (0.0, 0.5, 1.0):
        assert block_boundary_conditions(KIND_DIRAC, coef, grid) == \
            (DIRICHLET, DIRICHLET)
        assert block_boundary_conditions(KIND_LAPLACIAN, coef, grid) == \
            (DIRICHLET, DIRICHLET)


def test_rayleigh_quotient_of_eigenvector_is_eigenvalue():
    s = sphere()
    op = assemble_dirac_square(s, SpinStructure.BOUNDING, 0.5,
                               make_grid(s, 128))
    res = smallest_eigenpairs(op, 1)
    rq = rayleigh_quotient(op, res.sections[0])
    assert rq == pytest.approx(res.eigenvalues[0], rel=1e-12)


def test_rayleigh_quotient_cover_test_function():
    # separated quotient of the k = 2 test function: 2 - (3/2)(1 - 1/4)
    from diraclab.scenarios import eval_test_section
    sc = cover_scenario(2)
    grid = make_grid(sc.surface, 1024)
    sec = eval_test_section(sc, "f_k", grid)
    op = assemble_laplacian(sc.surface, sec.nu, grid)
    assert rayleigh_quotient(op, sec) == pytest.approx(0.875, abs=5e-4)


def test_rayleigh_quotient_cylinder_sine():
    s = cylinder(5.0)
    grid = make_grid(s, 512)
    vals = np.zeros((2, grid.n))
    vals[0] = np.sin(math.pi * grid.nodes / 5.0)
    sec = Section(kind=KIND_DIRAC, nu=0.0, grid=grid, values=vals)
    op = assemble_dirac_square(s, SpinStructure.NON_BOUNDING, 0.0, grid)
    assert rayleigh_quotient(op, sec) == \
        pytest.approx(math.pi ** 2 / 25.0, abs=1e-4)


def test_rayleigh_zero_section_raises():
    s = cylinder()
    grid = make_grid(s, 32)
    op = assemble_laplacian(s, 0.0, grid)
    with pytest.raises(AssemblyError):
        rayleigh_quotient(op, Section(kind=KIND_LAPLACIAN, nu=0.0, grid=grid,
                                      values=np.zeros(grid.n)))


def test_mode_symmetry_exact():
    s = sphere()
    grid = make_grid(s, 128)
    for nu in (0.5, 1.5):
        a = assemble_dirac_square(s, SpinStructure.BOUNDING, nu, grid)
        b = assemble_dirac_square(s, SpinStructure.BOUNDING, -nu, grid)
        va = np.sort(smallest_eigenpairs(a, 4).eigenvalues)
        vb = np.sort(smallest_eigenpairs(b, 4).eigenvalues)
        assert np.array_equal(va, vb)  # identical blocks, reordered


def test_dirac_mode_must_match_spin_lattice():
    s = cylinder()
    grid = make_grid(s, 32)
    with pytest.raises(AssemblyError):
        assemble_dirac_square(s, SpinStructure.BOUNDING, 1.0, grid)
    with pytest.raises(AssemblyError):
        assemble_dirac_square(s, SpinStructure.NON_BOUNDING, 0.5, grid)


def test_domain_monotonicity_on_nested_windows():
    # aligned spacings make the hat spaces genuinely nested, so every
    # fixed-index Dirichlet eigenvalue is non-increasing in the window
    s = cylinder(6.0)
    h = 6.0 / 384
    prev = None
    for b in (4.0, 5.0, 6.0):
        n = int(round(b / h)) - 1
        grid = Grid(a=0.0, b=b, n=n)
        op = assemble_laplacian(s, 0.0, grid)
        vals = smallest_eigenpairs(op, 5).eigenvalues
        if prev is not None:
            assert np.all(vals <= prev + 1e-10)
        prev = vals


def test_bochner_energy_zero_for_parallel_section():
    # constant spinor on the flat cylinder in the periodic zero mode:
    # no connection energy and no curvature term
    s = cylinder(5.0)
    grid = make_grid(s, 64)
    op = assemble_dirac_square(s, SpinStructure.NON_BOUNDING, 0.0, grid)
    vals = np.zeros((2, grid.n))
    vals[0] = 1.0
    sec = Section(kind=KIND_DIRAC, nu=0.0, grid=grid, values=vals)
    assert abs(bochner_gradient_energy(s, op, sec)) < 1e-12


def test_bochner_energy_half_split_on_sphere_ground(sphere_dirac_tone):
    from diraclab.operators import dirac_energy
    s = sphere()
    grid = make_grid(s, 512)
    op = assemble_dirac_square(s, SpinStructure.BOUNDING, 0.5, grid)
    res = smallest_eigenpairs(op, 1)
    phi = res.sections[0]
    bge = bochner_gradient_energy(s, op, phi)
    assert bge / dirac_energy(s, op, phi) == pytest.approx(0.5, abs=1e-3)


def test_bochner_energy_nonnegative_on_curved_scenarios():
    rng = np.random.default_rng(99)
    for sid, nu in (("round-sphere", 0.5), ("flat-cylinder-l5-bounding", 0.5),
                    ("growing-curvature", 0.5)):
        sc = find_scenario(sid)
        grid = make_grid(sc.surface, 128)
        op = assemble_dirac_square(sc.surface, sc.spin, nu, grid)
        for _ in range(3):
            sec = Section(kind=KIND_DIRAC, nu=nu, grid=grid,
                          values=rng.standard_normal((2, grid.n)))
            assert bochner_gradient_energy(sc.surface, op, sec) >= -1e-8


def test_leibniz_defect_constant_multiplier_vanishes():
    s = cylinder(5.0)
    grid = make_grid(s, 128)
    op = assemble_dirac_square(s, SpinStructure.NON_BOUNDING, 0.0, grid)
    phi = smallest_eigenpairs(op, 1).sections[0]
    ones = Section(kind=KIND_LAPLACIAN, nu=0.0, grid=grid,
                   values=np.ones(grid.n))
    assert leibniz_defect(s, SpinStructure.NON_BOUNDING, 0.0, grid,
                          ones, phi) == 0.0


def leibniz_defect_at(n):
    s = cylinder(5.0)
    grid = make_grid(s, n)
    op = assemble_dirac_square(s, SpinStructure.NON_BOUNDING, 0.0, grid)
    phi = smallest_eigenpairs(op, 1).sections[0]
    fmul = Section(kind=KIND_LAPLACIAN, nu=0.0, grid=grid, values=grid.nodes)
    return leibniz_defect(s, SpinStructure.NON_BOUNDING, 0.0, grid, fmul, phi)


def test_leibniz_defect_first_order():
    d = [leibniz_defect_at(n) for n in (128, 256, 512)]
    for a, b in zip(d, d[1:]):
        assert 1.7 <= a / b <= 2.3


def test_leibniz_defect_cutoff_multiplier_bound():
    # for a ramp with slope <= 1/rho the defect stays below
    # ||phi||/rho plus a first-order term
    s = cylinder(16.0)
    grid = make_grid(s, 256)
    op = assemble_dirac_square(s, SpinStructure.NON_BOUNDING, 0.0, grid)
    phi = smallest_eigenpairs(op, 1).sections[0]
    rho = 4.0
    t = grid.nodes
    ramp = np.clip(2.0 - np.abs(t - 8.0) / rho, 0.0, 1.0)
    fmul = Section(kind=KIND_LAPLACIAN, nu=0.0, grid=grid, values=ramp)
    defect = leibniz_defect(s, SpinStructure.NON_BOUNDING, 0.0, grid,
                            fmul, phi)
    w = s.period * grid.h * np.ones(grid.n)
    phi_norm = math.sqrt(float(np.sum(w * phi.values[0] ** 2)))
    assert defect <= phi_norm / rho + 10.0 * grid.h


def test_dump_operator_matrix_market(tmp_path):
    s = cylinder()
    op = assemble_laplacian(s, 1.0, make_grid(s, 32))
    sp = tmp_path / "stiff.mtx"
    mp = tmp_path / "mass.mtx"
    dump_operator(op, sp, mp)
    S = scipy.io.mmread(str(sp)).toarray()
    M = scipy.io.mmread(str(mp)).toarray()
    assert np.allclose(S, op.stiffness_dense())
    assert np.allclose(M, op.mass_dense())


def test_section_shape_validation():
    grid = Grid(a=0.0, b=1.0, n=32)
    with pytest.raises(AssemblyError):
        Section(kind=KIND_DIRAC, nu=0.0, grid=grid, values=np.ones(32))
    with pytest.raises(AssemblyError):
        Section(kind=KIND_LAPLACIAN, nu=0.0, grid=grid,
                values=np.full(32, math.nan))


def test_grid_validation():
    with pytest.raises(AssemblyError):
        Grid(a=0.0, b=1.0, n=8)  # below the minimum node count
    with pytest.raises(AssemblyError):
        Grid(a=1.0, b=0.0, n=32)
