import math

import numpy as np
import pytest

from diraclab.errors import AssemblyError
from diraclab.eigensolve import (
    GridPolicy,
    fundamental_tone,
    richardson,
    smallest_eigenpairs,
    truncation_probe,
)
from diraclab.geometry import ConstantWarp, CosineWarp, WarpedSurface
from diraclab.operators import (
    KIND_DIRAC,
    KIND_LAPLACIAN,
    assemble_dirac_square,
    assemble_laplacian,
    make_grid,
)
from diraclab.scenarios import cover_scenario, find_scenario
from diraclab.spin import SpinStructure

HALF_PI = math.pi / 2


def sphere():
    return WarpedSurface(warp=CosineWarp(), t_min=-HALF_PI, t_max=HALF_PI,
                         period=2 * math.pi)


def cylinder(length=5.0):
    return WarpedSurface(warp=ConstantWarp(1.0), t_min=0.0, t_max=length,
                         period=2 * math.pi)


def test_residuals_within_tolerance():
    s = sphere()
    grid = make_grid(s, 512)
    for op in (assemble_laplacian(s, 1.0, grid),
               assemble_dirac_square(s, SpinStructure.BOUNDING, 0.5, grid)):
        res = smallest_eigenpairs(op, 3)
        assert np.all(res.residuals <= 1e-8)
        assert np.all(np.diff(res.eigenvalues) >= 0)


def test_dense_and_lanczos_agree():
    s = sphere()
    grid = make_grid(s, 512)
    op = assemble_dirac_square(s, SpinStructure.BOUNDING, 0.5, grid)
    dense = smallest_eigenpairs(op, 4, solver="dense")
    lanczos = smallest_eigenpairs(op, 4, solver="lanczos")
    assert np.max(np.abs(dense.eigenvalues - lanczos.eigenvalues)) <= 1e-8


def test_lanczos_is_default_above_dense_threshold():
    s = cylinder()
    op = assemble_laplacian(s, 0.0, make_grid(s, 600))
    res = smallest_eigenpairs(op, 2)
    assert res.solver == "lanczos"
    assert res.eigenvalues[0] == pytest.approx(math.pi ** 2 / 25, rel=1e-4)


def test_cylinder_dirac_ground_single_grid():
    s = cylinder(5.0)
    op = assemble_dirac_square(s, SpinStructure.NON_BOUNDING, 0.0,
                               make_grid(s, 512))
    res = smallest_eigenpairs(op, 1)
    assert res.eigenvalues[0] == pytest.approx(math.pi ** 2 / 25, abs=1e-4)


def test_count_validation():
    s = cylinder()
    op = assemble_laplacian(s, 0.0, make_grid(s, 32))
    with pytest.raises(AssemblyError):
        smallest_eigenpairs(op, 0)
    with pytest.raises(AssemblyError):
        smallest_eigenpairs(op, op.size - 1)


def test_richardson_recovers_geometric_sequence():
    exact = 1.7
    seq = [exact + 0.1 * 4.0 ** (-k) for k in range(3)]
    val, bar, order = richardson(seq)
    assert val == pytest.approx(exact, abs=1e-12)
    assert order == pytest.approx(2.0, abs=1e-9)
    assert bar >= abs(val - seq[-1])


def test_richardson_handles_non_geometric_noise():
    val, bar, order = richardson([1.0, 1.2, 1.1])
    assert val == 1.1
    assert bar > 0


def test_sphere_dirac_tone(sphere_dirac_tone):
    tone = sphere_dirac_tone
    assert tone.lambda_star == pytest.approx(1.0, abs=1e-3)
    assert tone.nu_star == 0.5
    assert tone.flags == []
    # higher modes pruned by the centrifugal floor once the tone is known
    assert "pruned_at" in tone.per_mode[2.5]


def test_sphere_scalar_first_nonzero(sphere_laplace_tone):
    tone = sphere_laplace_tone
    assert tone.kernel_skipped
    assert tone.lambda_star == pytest.approx(2.0, abs=1e-3)


def test_cylinder_scalar_tone_has_no_kernel_skip():
    tone = fundamental_tone(cylinder(5.0), KIND_LAPLACIAN, None,
                            GridPolicy(base_n=128, levels=2))
    assert not tone.kernel_skipped
    assert tone.lambda_star == pytest.approx(math.pi ** 2 / 25, abs=1e-3)


def test_cover_m2_scalar_mode_below_test_function_quotient():
    # the nu = 1/2 restriction of the cover Laplacian dips below the
    # quotient of the matching test function (0.875), down to nu(nu+1)
    sc = cover_scenario(2)
    tone = fundamental_tone(sc.surface, KIND_LAPLACIAN, None,
                            GridPolicy(base_n=256, levels=3))
    rec = tone.per_mode[0.5]
    assert rec["value"] <= 0.875
    assert rec["value"] == pytest.approx(0.75, abs=2e-3)


def test_cover_m5_dirac_tone_attains_curvature_floor():
    sc = cover_scenario(5)
    tone = fundamental_tone(sc.surface, KIND_DIRAC, sc.spin,
                            GridPolicy(base_n=256, levels=3))
    assert tone.lambda_star == pytest.approx(1.0, abs=1e-3)
    assert tone.nu_star == pytest.approx(0.5, abs=1e-12)
    # every unpruned mode stays above the floor within its error bar
    for nu, rec in tone.per_mode.items():
        if "value" in rec:
            assert rec["value"] >= 1.0 - 3 * rec["error_bar"] - 1e-9


def test_flat_cylinder_tones_both_structures():
    for L in (2.0, 5.0):
        for spin, shift in ((SpinStructure.NON_BOUNDING, 0.0),
                            (SpinStructure.BOUNDING, 0.25)):
            tone = fundamental_tone(cylinder(L), KIND_DIRAC, spin,
                                    GridPolicy(base_n=128, levels=3))
            expect = shift + (math.pi / L) ** 2
            assert tone.lambda_star == pytest.approx(expect, abs=1e-3)


def test_probe_long_cylinder_counts_match_string_oracle():
    s = cylinder(64.0)
    windows = [(0.0, 8.0), (0.0, 16.0), (0.0, 32.0), (0.0, 64.0)]
    probe = truncation_probe(s, KIND_DIRAC, SpinStructure.NON_BOUNDING,
                             windows, 0.1, n_base=400)
    # two spinor components of the periodic zero mode, string values
    # pi^2 j^2 / L^2 below 0.1
    expected = [2 * math.floor(L * math.sqrt(0.1) / math.pi)
                for L in (8, 16, 32, 64)]
    assert probe.counts == expected
    assert not probe.stable
    assert probe.counts[-1] > probe.counts[0]


def test_probe_growing_curvature_counts_stabilize():
    sc = find_scenario("growing-curvature")
    exp = next(e for e in sc.expected if e["check"] == "probe")
    probe = truncation_probe(sc.surface, KIND_DIRAC, sc.spin,
                             [tuple(w) for w in exp["windows"]],
                             exp["threshold"], n_base=400)
    assert probe.stable
    assert probe.counts[0] == probe.counts[-1]


def test_sweep_exhaustion_sets_warning_flag():
    # a very fat cylinder keeps every centrifugal floor below the tone,
    # so a small cutoff cap can never certify the pruning
    fat = WarpedSurface(warp=ConstantWarp(100.0), t_min=0.0, t_max=5.0,
                        period=2 * math.pi)
    tone = fundamental_tone(
        fat, KIND_DIRAC, SpinStructure.NON_BOUNDING,
        GridPolicy(base_n=64, levels=1, mode_cutoff=4, max_mode_cutoff=8))
    assert "sweep-exhausted-without-pruning-certificate" in tone.flags
    assert tone.lambda_star == pytest.approx(math.pi ** 2 / 25, rel=1e-3)


def test_probe_rejects_non_nested_windows():
    s = cylinder(10.0)
    with pytest.raises(AssemblyError):
        truncation_probe(s, KIND_DIRAC, SpinStructure.NON_BOUNDING,
                         [(0.0, 8.0), (1.0, 6.0)], 0.1)


def test_probe_round_sphere_counts_stable():
    s = sphere()
    d = 0.3
    windows = [(-HALF_PI + d / 2 ** i, HALF_PI - d / 2 ** i)
               for i in range(3)]
    probe = truncation_probe(s, KIND_DIRAC, SpinStructure.BOUNDING,
                             windows, 10.0, n_base=400)
    assert probe.stable
