import numpy as np
import pytest

from skinheal.errors import DomainError, EmptyGbzError, RefineKError, WindingUndefinedError
from skinheal.laurent import char_roots, laurent_eval
from skinheal.models import SingleBandModel, TwoChainModel, build_truncated
from skinheal.spectra import (Grid, Healing, Region, compute_threshold, default_grid, obc_gbz_scan,
                              pbc_spectrum, predict_self_healing, sibc_classify, threshold_for, winding_integral_adaptive,
                              winding_integral, winding_roots, winding_roots_batch)

from oracles import FIG2, FIG4, saddle_energies, single_band_det, two_chain_det, winding_brute

HERM = {-1: 1.0, 1: 1.0}


@pytest.fixture(scope="module")
def fig2():
    return SingleBandModel.from_hops(FIG2)


@pytest.fixture(scope="module")
def fig4():
    return TwoChainModel(**FIG4)


@pytest.fixture(scope="module")
def fig2_gbz(fig2):
    grid = default_grid(fig2, 400)
    return grid, obc_gbz_scan(fig2, grid)


# PBC loop -----------------------------------------------------------------------------


def test_pbc_needs_64_samples(fig2):
    with pytest.raises(DomainError):
        pbc_spectrum(fig2, 32)


def test_hermitian_loop_is_real_segment():
    loop = pbc_spectrum(SingleBandModel.from_hops(HERM), 256)
    E = loop.energies[:, 0]
    assert np.abs(E.imag).max() < 1e-14
    assert E.real.min() == pytest.approx(-2.0) and E.real.max() == pytest.approx(2.0, abs=1e-3)


@pytest.mark.parametrize("a,b", [(1.0, 0.4), (0.3, 1.2)])
def test_hatano_nelson_ellipse(a, b):
    loop = pbc_spectrum(SingleBandModel.from_hops({-1: a, 1: b}), 512)
    E, k = loop.energies[:, 0], loop.k
    assert np.allclose(E, (a + b) * np.cos(k) + 1j * (b - a) * np.sin(k))


def test_loop_samples_and_closure(fig2):
    loop = pbc_spectrum(fig2, 1024)
    assert len(loop.k) == 1024
    assert loop.k[0] == pytest.approx(-np.pi) and loop.k[-1] < np.pi
    step = np.abs(np.diff(loop.energies[:, 0])).max()
    assert abs(loop.energies[0, 0] - loop.energies[-1, 0]) <= 2 * step


def _self_intersections(z):
    a, b = z, np.roll(z, -1)
    n = len(z)
    count = 0
    for i in range(n):
        p, q = a[i], b[i]
        j = np.arange(i + 2, n if i > 0 else n - 1)
        c, d = a[j], b[j]
        def cross(u, v):
            return u.real * v.imag - u.imag * v.real
        d1, d2 = cross(q - p, c - p), cross(q - p, d - p)
        d3, d4 = cross(d - c, p - c), cross(d - c, q - c)
        count += int(np.count_nonzero((d1 * d2 < 0) & (d3 * d4 < 0)))
    return count


def test_fig2_loop_has_one_self_intersection(fig2):
    assert _self_intersections(pbc_spectrum(fig2, 512).energies[:, 0]) == 1


def test_two_chain_bands_are_continuous(fig4):
    loop = pbc_spectrum(fig4, 1024)
    assert loop.bands == 2
    jumps = np.abs(np.diff(loop.energies, axis=0)).max()
    assert jumps < 0.05
    for k, row in zip(loop.k[::97], loop.energies[::97]):
        ev = np.linalg.eigvals(fig4.bloch_matrix_k(k))
        assert np.allclose(np.sort_complex(row), np.sort_complex(ev))


# Winding numbers ------------------------------------------------------------------------


def test_left_hop_dominated_chain_has_winding_minus_one():
    assert winding_roots(SingleBandModel.from_hops({-1: 1.0, 1: 0.01}), 0.0) == -1


def test_far_energy_has_zero_winding(fig2):
    assert winding_roots(fig2, 3.6 + 0.1j) == 0
    assert winding_roots(fig4_model(), 10.0) == 0


def fig4_model():
    return TwoChainModel(**FIG4)


def test_fig2_windings(fig2):
    assert winding_roots(fig2, 0.35j) == -1
    assert winding_roots(fig2, -0.5 + 0.005j) == -2


def test_hermitian_integral_outside():
    assert winding_integral(SingleBandModel.from_hops(HERM), 3.0) == 0


def test_fig4_integral_at_skin_energy(fig4):
    assert winding_integral(fig4, 1 + 0.4j) == -1


def test_winding_matches_brute_force(fig2, fig4):
    for E in [0.35j, -0.5 + 0.005j, -1 + 0.05j, 2.0 + 0.3j]:
        assert winding_roots(fig2, E) == winding_brute(single_band_det(FIG2), E)
    for E in [1 + 0.4j, -1 - 0.3j, 0.2j]:
        assert winding_integral_adaptive(fig4, E) == winding_brute(two_chain_det(**FIG4), E)


def test_on_loop_raises(fig2):
    E = complex(laurent_eval(fig2.symbol, np.exp(0.7j)))
    with pytest.raises(WindingUndefinedError):
        winding_roots(fig2, E)


def test_integral_needs_256(fig2):
    with pytest.raises(DomainError):
        winding_integral(fig2, 0.35j, K=128)


def test_integral_refine_error_near_loop(fig2):
    E = complex(laurent_eval(fig2.symbol, np.exp(0.7j))) + 1e-6j
    with pytest.raises(RefineKError) as info:
        winding_integral(fig2, E, K=256)
    assert info.value.suggested_K > 256


@pytest.mark.parametrize("make", [lambda: SingleBandModel.from_hops(FIG2), fig4_model])
def test_cross_validation_random(make):
    model = make()
    rng = np.random.default_rng(11)
    x0, x1, y0, y1 = pbc_spectrum(model).bounding_box(0.0)
    E = rng.uniform(x0, x1, 200) + 1j * rng.uniform(y0, y1, 200)
    W, on = winding_roots_batch(model, E)
    for e, w, o in zip(E, W, on):
        if o:
            continue
        assert w == winding_integral_adaptive(model, e)


def test_hermitian_zero_winding_everywhere():
    model = SingleBandModel.from_hops({-2: 0.3, -1: 1.0, 1: 1.0, 2: 0.3})
    rng = np.random.default_rng(3)
    E = rng.uniform(-4, 4, 300) + 1j * rng.uniform(-1, 1, 300)
    W, on = winding_roots_batch(model, E)
    assert np.all(W[~on] == 0)


# GBZ -------------------------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.25, 0.6])
def test_hatano_nelson_gbz_circle(t):
    model = SingleBandModel.from_hops({-1: 1.0, 1: t})
    grid = Grid((-2.5, 2.5, -0.7, 0.9), 200)
    gbz = obc_gbz_scan(model, grid)
    assert len(gbz) > 20
    assert np.allclose(np.abs(gbz.beta), 1 / np.sqrt(t), rtol=1e-6)
    assert np.abs(gbz.E.imag).max() < 1e-6
    assert np.abs(gbz.E.real).max() <= 2 * np.sqrt(t) + 1e-6


def test_hermitian_gbz_is_unit_circle():
    model = SingleBandModel.from_hops(HERM)
    gbz = obc_gbz_scan(model, Grid((-2.5, 2.5, -0.55, 0.45), 200))
    assert np.allclose(np.abs(gbz.beta), 1.0, atol=1e-6)


def test_fig2_gbz_outside_unit_circle(fig2_gbz):
    _, gbz = fig2_gbz
    assert np.abs(gbz.beta).min() > 1 + 1e-6


def test_gbz_points_satisfy_tie_and_symbol(fig2, fig2_gbz):
    _, gbz = fig2_gbz
    assert np.abs(laurent_eval(fig2.symbol, gbz.beta) - gbz.E).max() < 1e-8
    for E, beta in list(zip(gbz.E, gbz.beta))[::37]:
        m = np.sort(char_roots(fig2.symbol, E).moduli)
        r = fig2.r
        assert abs(m[r] - m[r - 1]) <= 1e-6 * (m[r] + m[r - 1]) / 2
        assert abs(beta) == pytest.approx(m[r], rel=1e-6)


def test_gbz_scan_is_thread_independent(fig2):
    grid = default_grid(fig2, 120)
    a = obc_gbz_scan(fig2, grid, threads=1)
    b = obc_gbz_scan(fig2, grid, threads=3)
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.E, b.E)


def test_empty_gbz_reports_field_range(fig2):
    with pytest.raises(EmptyGbzError) as info:
        obc_gbz_scan(fig2, Grid((10, 11, 10, 11), 20))
    assert info.value.f_min is not None and info.value.f_max is not None


def test_obc_eigenvalues_approach_gbz_arcs(fig2, fig2_gbz):
    _, gbz = fig2_gbz
    dist = []
    for N in (30, 60, 120):
        ev = np.linalg.eigvals(build_truncated(fig2, N).dense())
        dist.append(np.abs(ev[:, None] - gbz.E[None, :]).min(axis=1).max())
    assert dist[0] > dist[1] > dist[2]


def test_winding_does_not_see_obc_arcs(fig2, fig2_gbz):
    _, gbz = fig2_gbz
    loop = pbc_spectrum(fig2, 4096).energies[:, 0]
    checked = 0
    for E in gbz.E[::50]:
        if np.abs(loop - E).min() < 0.05:
            continue
        for d in (1e-4, 1e-4j):
            assert winding_roots(fig2, E + d) == winding_roots(fig2, E - d)
        checked += 1
    assert checked > 5


def test_winding_constant_along_path_off_loop(fig2):
    # a straight path inside the narrow W = -2 lens on the real axis
    for E in np.linspace(-0.8 + 0.005j, -0.2 - 0.005j, 25):
        assert winding_roots(fig2, E) == -2


# Classification and threshold ------------------------------------------------------


def test_classify(fig2):
    c = sibc_classify(fig2, 0.35j)
    assert c.region is Region.SKIN_NEGATIVE and c.multiplicity == 1
    assert sibc_classify(fig2, 10.0).region is Region.EXTERIOR
    c = sibc_classify(fig2, -0.5 + 0.005j)
    assert c.region is Region.SKIN_NEGATIVE and c.multiplicity == 2
    on = complex(laurent_eval(fig2.symbol, np.exp(1.3j)))
    assert sibc_classify(fig2, on).region is Region.ON_PBC_LOOP


def test_classify_positive_interior(fig4):
    grid = default_grid(fig4, 60)
    W, on = winding_roots_batch(fig4, grid.nodes())
    pos = grid.nodes()[(W > 0) & ~on]
    assert len(pos) > 0
    assert sibc_classify(fig4, pos[0]).region is Region.INTERIOR_POSITIVE


def test_fig2_threshold_matches_saddle_oracle(fig2, fig2_gbz):
    grid, gbz = fig2_gbz
    rep = compute_threshold(fig2, gbz, grid)
    sad = saddle_energies(FIG2)
    assert len(sad) >= 2
    assert not rep.bloch_points_present and rep.E_m2 is None
    assert rep.E_m == rep.E_m1
    assert rep.E_m1 == pytest.approx(sad.imag.max(), abs=1e-6)
    assert rep.E_m1 < 0.35


def test_hermitian_threshold_is_zero():
    model = SingleBandModel.from_hops(HERM)
    rep = compute_threshold(model, obc_gbz_scan(model, Grid((-2.5, 2.5, -0.55, 0.45), 200)),
                            Grid((-2.5, 2.5, -0.55, 0.45), 200))
    assert rep.E_m1 == pytest.approx(0.0, abs=1e-6)
    assert rep.bloch_points_present


def test_fig4_threshold_structure(fig4):
    rep = threshold_for(fig4, 200)
    assert rep.bloch_points_present
    assert rep.E_m2 is not None and rep.E_m2 < rep.E_m1
    assert rep.E_m == rep.E_m1


# Theorem ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fig2_threshold(fig2, fig2_gbz):
    grid, gbz = fig2_gbz
    return compute_threshold(fig2, gbz, grid)


def test_predict_fig3(fig2, fig2_threshold):
    a = predict_self_healing(fig2, 0.35j, fig2_threshold)
    assert a.verdict is Healing.SELF_HEALING and a.margin > 0 and not a.indeterminate
    b = predict_self_healing(fig2, -1 + 0.05j, fig2_threshold)
    assert b.verdict is Healing.NOT_SELF_HEALING and b.margin < 0


def test_obc_energies_never_heal(fig2, fig2_gbz, fig2_threshold):
    _, gbz = fig2_gbz
    loop = pbc_spectrum(fig2, 4096).energies[:, 0]
    for E in gbz.E[::40]:
        if np.abs(loop - E).min() < 1e-3:
            continue
        p = predict_self_healing(fig2, E, fig2_threshold)
        assert p.verdict is not Healing.SELF_HEALING


def test_not_a_skin_mode(fig2, fig2_threshold):
    assert predict_self_healing(fig2, 10.0, fig2_threshold).verdict is Healing.NOT_A_SKIN_MODE


def test_indeterminate_at_threshold(fig2, fig2_threshold):
    # pick an energy with W = -1 exactly at Im = E_m
    E = 0.0 + 1j * fig2_threshold.E_m
    assert winding_roots(fig2, E) < 0
    p = predict_self_healing(fig2, E, fig2_threshold)
    assert p.indeterminate
