"""Microcanonical sampler checks, including the brute-force shell oracle."""

import math

import numpy as np
import pytest
from scipy.stats import chi2, chisquare

from nsdi.sampling import (EnsembleSpec, SamplingRegion, derive_region,
                           derive_stream, potential_field_free,
                           sample_initial, thin_shell_oracle)

SPEC = EnsembleSpec(E_tilde=-0.58, n_samples=200000, master_seed=314159)


def test_samples_sit_on_the_energy_shell():
    for i in range(300):
        state, phi = sample_initial(SPEC, i)
        h = (state.px ** 2 + state.py ** 2
             + potential_field_free(state.x, state.y))
        assert abs(h - SPEC.E_tilde) < 1e-12
        assert state.y > 0.0
        assert 0.0 <= phi < 2.0 * math.pi


def test_samples_respect_the_region_box():
    region = SPEC.resolved_region()
    for i in range(300):
        state, _ = sample_initial(SPEC, i)
        assert region.x_min <= state.x <= region.x_max
        assert region.y_min < state.y <= region.y_max
        assert potential_field_free(state.x, state.y) <= SPEC.E_tilde


def test_region_bounds_match_axis_roots():
    region = derive_region(-0.58)
    # on the y axis the potential is -3.5/y, so the ceiling is 3.5/0.58
    assert abs(region.y_max - 3.5 / 0.58) < 1e-9
    assert abs(region.x_max - 4.0 / 0.58) < 1e-12
    assert region.x_min == -region.x_max
    assert region.y_min == 0.0


def test_deep_shell_includes_and_excludes_reference_points():
    region = derive_region(-3.5)
    # V0(0, 1) = -4 + 0.5 = -3.5: exactly on the shell, inside the box
    assert potential_field_free(0.0, 1.0) == pytest.approx(-3.5, abs=1e-14)
    assert region.y_max >= 1.0 - 1e-12
    # V0(0, 6) is far above the shell energy and outside the box
    assert potential_field_free(0.0, 6.0) > -3.5
    assert 6.0 > region.y_max


def test_stream_is_deterministic_and_index_separated():
    a = derive_stream(99, 5).random(4)
    b = derive_stream(99, 5).random(4)
    c = derive_stream(99, 6).random(4)
    d = derive_stream(100, 5).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_sampling_order_does_not_matter():
    rng = np.random.default_rng(0)
    idx = rng.permutation(1000)
    shuffled = {int(i): sample_initial(SPEC, int(i)) for i in idx}
    for i in range(1000):
        state, phi = sample_initial(SPEC, i)
        s2, p2 = shuffled[i]
        assert (state.x, state.y, state.px, state.py) == (s2.x, s2.y, s2.px,
                                                          s2.py)
        assert phi == p2


def test_position_marginal_matches_thin_shell_oracle():
    n_a, n_b = 20000, 15000
    xs = np.empty(n_a)
    ys = np.empty(n_a)
    for i in range(n_a):
        st, _ = sample_initial(SPEC, i)
        xs[i], ys[i] = st.x, st.y
    oracle = thin_shell_oracle(-0.58, n_b, seed=2718)

    # the oracle only covers kinetic energies below its momentum cap;
    # restrict both samples to the same potential band
    v_floor = -0.58 - (6.0 - 10.0 * 1e-3)
    v_a = np.array([potential_field_free(x, y) for x, y in zip(xs, ys)])
    keep = v_a >= v_floor
    xs, ys = xs[keep], ys[keep]
    v_b = np.array([potential_field_free(x, y) for x, y in oracle])
    assert (v_b >= v_floor - 1e-9).all()

    region = derive_region(-0.58)
    bins_x = np.linspace(region.x_min, region.x_max, 21)
    bins_y = np.linspace(region.y_min, region.y_max, 21)
    A = np.histogram2d(xs, ys, bins=(bins_x, bins_y))[0].ravel()
    B = np.histogram2d(oracle[:, 0], oracle[:, 1],
                       bins=(bins_x, bins_y))[0].ravel()
    mask = (A + B) >= 10
    k1 = math.sqrt(B[mask].sum() / A[mask].sum())
    k2 = 1.0 / k1
    stat = float(np.sum((k1 * A[mask] - k2 * B[mask]) ** 2
                        / (A[mask] + B[mask])))
    dof = int(mask.sum()) - 1
    p = chi2.sf(stat, dof)
    assert p > 0.01


def test_phase_is_uniform():
    phis = np.array([sample_initial(SPEC, i)[1] for i in range(5000)])
    counts = np.histogram(phis, bins=20, range=(0.0, 2.0 * math.pi))[0]
    assert chisquare(counts).pvalue > 0.01


def test_retry_budget_raises_on_inconsistent_region():
    # a box that misses the allowed region entirely: shallow potential only
    bad = EnsembleSpec(E_tilde=-0.58, n_samples=10, master_seed=1,
                       region=SamplingRegion(5.0, 6.0, 5.0, 6.0))
    with pytest.raises(RuntimeError):
        sample_initial(bad, 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(E_tilde=0.0, n_samples=10, master_seed=1)
    with pytest.raises(ValueError):
        EnsembleSpec(E_tilde=-0.5, n_samples=0, master_seed=1)
    with pytest.raises(ValueError):
        EnsembleSpec(E_tilde=-0.5, n_samples=10, master_seed=-2)
    with pytest.raises(ValueError):
        SamplingRegion(1.0, 1.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        SamplingRegion(-1.0, 1.0, -0.5, 2.0)
