"""Outcome extraction, histograms, shape metrics, crossing timing."""

import math

import numpy as np
import pytest

from nsdi.analysis import (EmptyEnsembleError, Histogram, Outcome,
                           PARALLEL_EDGES, PERP_EDGES, PERP_EDGES_SIGNED,
                           TAG_BOUND, TAG_DOUBLE, TAG_REJECTED, classify,
                           classify_final, hump_metric,
                           ion_parallel_histogram, perp_electron_histogram,
                           smoothed_density, symmetry_stats,
                           tail_is_monotone, time_to_nearest_extremum,
                           timing_fractions, zero_suppression)
from nsdi.fields import FieldParams, effective_field
from nsdi.integrate import IntegratorConfig, integrate, zero_field_reference
from nsdi.models import SymState2e
from nsdi.saddle import saddle_sym2e

FIELD = FieldParams(F_peak=0.137)


def outcome(tag=TAG_DOUBLE, pi=1.0, pp=0.3, h=0.2):
    return Outcome(tag, pi, pp, h)


def test_outcome_validation():
    with pytest.raises(ValueError):
        Outcome("escaped", 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Outcome(TAG_DOUBLE, math.nan, 1.0, 1.0)
    r = Outcome(TAG_REJECTED, math.nan, math.nan, math.nan)
    assert r.tag == TAG_REJECTED


def test_classify_final_branches():
    assert classify_final("deep_encounter_abort", 1.0, 600.0, 1.0) \
        == TAG_REJECTED
    assert classify_final("step_underflow", 1.0, 600.0, 1.0) == TAG_REJECTED
    assert classify_final("completed", 0.5, 600.0, 1.0) == TAG_DOUBLE
    assert classify_final("completed", -0.5, 600.0, 1.0) == TAG_BOUND
    assert classify_final("completed", 0.5, 100.0, 1.0) == TAG_BOUND
    assert classify_final("completed", 0.5, 600.0, -1.0) == TAG_BOUND


def escaping_record():
    info = saddle_sym2e(effective_field(6.0 * math.pi / FIELD.omega, FIELD))
    x, y = info.position
    s = 1.05
    state = SymState2e(x=s * x, y=s * y, px=0.6 * x / info.r_s,
                       py=0.6 * y / info.r_s)
    return integrate("sym2e", state.as_array(),
                     6.0 * math.pi / FIELD.omega, IntegratorConfig(), FIELD)


def test_classify_real_double_ionization():
    rec = escaping_record()
    out = classify(rec)
    assert out.tag == TAG_DOUBLE
    s = rec.state_final
    assert out.p_parallel_ion == pytest.approx(-2.0 * s[2], rel=1e-15)
    assert out.p_perp_electron == pytest.approx(s[3], rel=1e-15)
    assert out.final_H == pytest.approx(rec.energy_final, rel=1e-15)
    assert out.final_H > 0.0


def test_classify_real_bound_complex():
    # tangential launch: enough angular motion to stay off the nucleus
    state = SymState2e(x=2.0, y=2.0, px=-0.354, py=0.354)
    rec = zero_field_reference("sym2e", state.as_array(), 200.0,
                               IntegratorConfig())
    out = classify(rec)
    assert out.tag == TAG_BOUND
    assert out.final_H < 0.0


def test_classify_real_rejected():
    cfg = IntegratorConfig(r_min=0.9)
    state = SymState2e(x=2.0, y=2.0, px=-1.0, py=-1.0)
    rec = integrate("sym2e", state.as_array(), 0.0, cfg, FIELD)
    out = classify(rec)
    assert out.tag == TAG_REJECTED
    assert math.isnan(out.p_parallel_ion)


def test_classify_rejects_other_models():
    rec = zero_field_reference("ngon", np.array([1.8, 0.0, 0.0, 0.33]),
                               10.0, IntegratorConfig(), n=3)
    with pytest.raises(ValueError):
        classify(rec)


# ---------------------------------------------------------------------------
# histograms

def test_histogram_counting_and_density():
    edges = np.linspace(0.0, 1.0, 6)
    h = Histogram.from_values([0.05, 0.15, 0.17, 0.5, 0.99, 2.0], edges)
    assert h.n_in_range == 5  # the overflow value is dropped
    assert h.counts.tolist() == [3, 0, 1, 0, 1]
    assert np.allclose(h.centers, [0.1, 0.3, 0.5, 0.7, 0.9])
    dens = h.density
    assert float(np.sum(dens * h.widths)) == pytest.approx(1.0, abs=1e-12)


def test_histogram_merge_is_exact_and_order_free():
    edges = np.linspace(-1.0, 1.0, 11)
    rng = np.random.default_rng(7)
    parts = [Histogram.from_values(rng.normal(size=100), edges)
             for _ in range(4)]
    total = parts[0].merge(parts[1]).merge(parts[2]).merge(parts[3])
    swapped = parts[3].merge(parts[2]).merge(parts[1]).merge(parts[0])
    assert np.array_equal(total.counts, swapped.counts)
    assert total.n_in_range == sum(p.n_in_range for p in parts)
    with pytest.raises(ValueError):
        parts[0].merge(Histogram.from_values([0.0], np.linspace(-1, 1, 5)))


def test_histogram_validation():
    with pytest.raises(ValueError):
        Histogram(np.array([0.0, 0.0, 1.0]), np.array([1, 1]))
    with pytest.raises(ValueError):
        Histogram(np.array([0.0, 1.0]), np.array([1, 2]))
    with pytest.raises(ValueError):
        Histogram(np.array([0.0, 1.0]), np.array([1]), "probability")
    with pytest.raises(ValueError):
        Histogram(np.array([0.0, 1.0]), np.array([0])).density


def test_histogram_csv_round_trip(tmp_path):
    edges = np.linspace(-2.0, 2.0, 9)
    h = Histogram.from_values(np.linspace(-1.9, 1.9, 57), edges)
    path = tmp_path / "h.csv"
    h.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "bin_left,bin_right,count,density"
    assert len(lines) == 1 + h.counts.size
    left, right, count, dens = lines[3].split(",")
    i = 2
    assert float(left) == h.edges[i] and float(right) == h.edges[i + 1]
    assert int(count) == h.counts[i]
    assert float(dens) == h.density[i]


def test_momentum_histogram_builders():
    outs = [outcome(pi=-1.0, pp=0.52), outcome(pi=1.0, pp=-0.52),
            outcome(tag=TAG_BOUND), outcome(pi=0.2, pp=0.1)]
    par = ion_parallel_histogram(outs)
    assert np.array_equal(par.edges, PARALLEL_EDGES)
    assert par.n_in_range == 3  # bound outcome dropped
    per = perp_electron_histogram(outs)
    assert np.array_equal(per.edges, PERP_EDGES)
    assert per.n_in_range == 3
    signed = perp_electron_histogram(outs, magnitude=False)
    assert np.array_equal(signed.edges, PERP_EDGES_SIGNED)
    # magnitude view folds the negative value into the positive half
    assert per.counts[np.searchsorted(PERP_EDGES, 0.52) - 1] == 2
    with pytest.raises(EmptyEnsembleError):
        ion_parallel_histogram([outcome(tag=TAG_BOUND)])
    with pytest.raises(EmptyEnsembleError):
        perp_electron_histogram([])


# ---------------------------------------------------------------------------
# shape metrics

def gaussian_mixture_hist(rng, centers, n=20000, sigma=0.3):
    vals = np.concatenate([rng.normal(c, sigma, n // len(centers))
                           for c in centers])
    return Histogram.from_values(vals, PARALLEL_EDGES, "density")


def test_smoothing_window_validation():
    h = gaussian_mixture_hist(np.random.default_rng(0), [0.0])
    with pytest.raises(ValueError):
        smoothed_density(h, window=4)
    with pytest.raises(ValueError):
        smoothed_density(h, window=0)
    flat = Histogram(np.linspace(0, 1, 11), np.full(10, 100), "density")
    smooth = smoothed_density(flat, 3)
    assert np.allclose(smooth[1:-1], flat.density[1:-1])


def test_hump_metric_separates_one_from_two():
    rng = np.random.default_rng(42)
    two = gaussian_mixture_hist(rng, [-1.0, 1.0])
    n, ratio = hump_metric(two)
    assert n == 2
    assert ratio < 0.5
    one = gaussian_mixture_hist(rng, [0.0])
    n, ratio = hump_metric(one)
    assert n == 1
    assert ratio == pytest.approx(1.0, abs=0.05)


def test_hump_metric_floor_ignores_stray_tail_bumps():
    rng = np.random.default_rng(3)
    base = gaussian_mixture_hist(rng, [-1.0, 1.0])
    spiked = base.counts.copy()
    # a ten-count pimple far in the tail, shaped so it survives smoothing
    spiked[2:7] += np.array([1, 2, 4, 2, 1])
    h = Histogram(base.edges, spiked, "density")
    assert hump_metric(h)[0] == 2
    assert hump_metric(h, floor_frac=0.0)[0] == 3


def test_hump_metric_requires_density_view():
    h = Histogram(np.linspace(-1, 1, 5), np.array([1, 3, 2, 1]))
    with pytest.raises(ValueError):
        hump_metric(h)
    assert hump_metric(h.as_density(), window=1)[0] == 1


def test_hump_metric_empty_interior():
    h = Histogram(np.linspace(-1, 1, 5), np.array([5, 0, 0, 5]), "density")
    n, ratio = hump_metric(h, window=1)
    assert n == 0
    assert math.isnan(ratio)


def test_zero_suppression_ratio():
    h = Histogram(np.linspace(0, 1, 5), np.array([2, 10, 6, 2]), "density")
    assert zero_suppression(h) == pytest.approx(0.2)
    empty = Histogram(np.linspace(0, 1, 5), np.zeros(4, dtype=int), "density")
    assert math.isnan(zero_suppression(empty))


def test_tail_monotone_detects_secondary_bumps():
    rng = np.random.default_rng(11)
    ray = Histogram.from_values(rng.rayleigh(0.5, 30000), PERP_EDGES,
                                "density")
    assert tail_is_monotone(ray)
    bump = ray.counts.copy()
    far = np.searchsorted(PERP_EDGES, 2.5)
    bump[far:far + 3] += int(0.4 * bump.max())
    assert not tail_is_monotone(Histogram(PERP_EDGES, bump, "density"))


def test_symmetry_stats_accepts_symmetric_and_flags_biased():
    rng = np.random.default_rng(5)
    sym = symmetry_stats(rng.normal(0.0, 1.0, 20000))
    assert sym.symmetric
    assert abs(sym.z_mean) <= 3.0 and abs(sym.z_skewness) <= 3.0
    shifted = symmetry_stats(rng.normal(0.2, 1.0, 20000))
    assert not shifted.symmetric
    assert abs(shifted.z_mean) > 3.0
    skewed = symmetry_stats(rng.exponential(1.0, 20000) - 1.0)
    assert abs(skewed.z_skewness) > 3.0
    with pytest.raises(ValueError):
        symmetry_stats([0.1] * 7)


# ---------------------------------------------------------------------------
# crossing timing

def nearest_extremum_brute(t, params):
    k0 = (params.omega * t + params.phi) / math.pi
    ks = np.arange(math.floor(k0) - 2, math.floor(k0) + 3)
    times = (ks * math.pi - params.phi) / params.omega
    return float(np.min(np.abs(times - t)))


def test_time_to_nearest_extremum_matches_brute_force():
    rng = np.random.default_rng(17)
    for _ in range(200):
        params = FieldParams(F_peak=0.137, phi=float(rng.uniform(0, 2 * math.pi)))
        t = float(rng.uniform(0.0, params.T_d))
        got = time_to_nearest_extremum(t, params)
        assert got == pytest.approx(nearest_extremum_brute(t, params),
                                    abs=1e-9)
        assert 0.0 <= got <= 0.25 * 2.0 * math.pi / params.omega + 1e-12


def test_extremum_offset_vanishes_on_the_lattice():
    params = FieldParams(F_peak=0.1, phi=0.7)
    for k in range(1, 5):
        t_k = (k * math.pi - params.phi) / params.omega
        assert time_to_nearest_extremum(t_k, params) < 1e-12


def test_timing_fractions_bookkeeping():
    omega = 0.057
    cycle = 2.0 * math.pi / omega
    offsets = [0.0, cycle / 16.0, cycle / 5.0, math.nan, math.inf]
    out = timing_fractions(offsets, omega)
    assert out["n"] == 3
    assert out["half_cycle"] == 1.0
    assert out["quarter_cycle"] == 1.0
    assert out["eighth_cycle"] == pytest.approx(2.0 / 3.0)
    expect = np.mean(np.abs(np.cos(omega * np.array(offsets[:3]))))
    assert out["mean_abs_cos"] == pytest.approx(float(expect), rel=1e-12)
    empty = timing_fractions([math.nan], omega)
    assert empty["n"] == 0 and math.isnan(empty["half_cycle"])
