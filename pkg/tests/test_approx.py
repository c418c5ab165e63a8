import math

import numpy as np
import pytest

from brushlets.anisotropy import Anisotropy
from brushlets.approx import (BoxIndexSet, ParameterError, approx_space_seminorm,
                              bernstein_check_relation, bernstein_experiment, bernstein_ratio,
                              counting_bound_check, fit_slope, greedy_m_term, is_exact,
                              jackson_experiment, jackson_r, random_n_term, same_delta_tiles,
                              sigma_m_curve, write_json, write_rate_csv)
from brushlets.covering import CoveringSpec, build_layer, rect_at
from brushlets.seqnorm import NormParams, lorentz_norm, m_norm
from brushlets.transform import CoefficientSet

FLAT = CoveringSpec(0.0, Anisotropy((1, 1)))
SPEC = CoveringSpec(0.8, Anisotropy((1.0, 1.5)))


def line(values, spec=FLAT, j=0, k=1):
    """Entries along one frequency axis of a single tile."""
    keys = [(j, k, i, 0) for i in range(len(values))]
    return CoefficientSet(spec, keys, values)


def plain(p, q=None, spec=FLAT):
    # s chosen so the tile weight vanishes: the norm is a plain lp norm
    nu = spec.aniso.nu
    return NormParams.for_spec(spec, nu * (1 / p - 0.5), p, p if q is None else q)


def test_greedy_extremes():
    c = line(np.random.default_rng(0).standard_normal(12))
    prm = plain(2)
    assert len(greedy_m_term(c, 0, prm)) == 0
    full = greedy_m_term(c, 40, prm)
    np.testing.assert_array_equal(full.keys, c.keys)
    np.testing.assert_array_equal(full.values, c.values)
    with pytest.raises(ValueError):
        greedy_m_term(c, -1, prm)


def test_greedy_plain_thresholding_and_ties():
    c = line([0.5, -3.0, 2.0, 3.0, 0.1])
    kept = greedy_m_term(c, 2, plain(1))
    assert sorted(kept.keys[:, 2].tolist()) == [1, 3]
    tie = greedy_m_term(line([1.0, 1.0, 1.0]), 1, plain(2))
    assert tie.keys[0, 2] == 0


def test_greedy_uses_tile_weight():
    c = CoefficientSet.from_entries(SPEC, {(0, 1, (0, 0)): 1.0, (4, 1, (0, 0)): 0.5})
    big = rect_at(4, 1, SPEC).measure
    assert big > 4
    prm = NormParams.for_spec(SPEC, 2.5, 1.0, 1.0)    # weight exponent 1.0 - 1 + 0.5 > 0
    assert greedy_m_term(c, 1, prm).keys[0, 0] == 4


def test_sigma_geometric_tail():
    c = line(2.0 ** -np.arange(1, 61))
    rows = sigma_m_curve(c, plain(2), range(0, 20))
    assert rows[0].sigma == pytest.approx(math.sqrt(c.energy()), rel=1e-14)
    for r in rows[1:]:
        assert r.sigma == pytest.approx(2.0 ** -r.m / math.sqrt(3), rel=1e-8)
        assert r.exact
    sig = [r.sigma for r in rows]
    assert all(b <= a for a, b in zip(sig, sig[1:]))


def test_sigma_labels_upper_bounds():
    c = line(np.arange(1.0, 6.0))
    assert not sigma_m_curve(c, plain(2, 1), [1])[0].exact
    assert not sigma_m_curve(c, plain(2), [1], kind="f")[0].exact
    with pytest.raises(ValueError):
        sigma_m_curve(c, plain(2), [1], kind="x")
    assert is_exact(plain(2), plain(2), "m")


def test_seminorm_examples():
    g = 0.7
    table = [(m, m ** -g) for m in range(1, 50)]
    assert approx_space_seminorm(table, g, math.inf).value == pytest.approx(1.0)
    assert approx_space_seminorm([(m, 0.0) for m in range(1, 9)], g, 1.0).value == 0.0
    dec = [(2 ** k, 3.0 ** -k) for k in range(8)]
    small = approx_space_seminorm(dec, 0.5, 2.0)
    assert small.form == "dyadic" and small.m_max == 128
    assert approx_space_seminorm(dec, 1.0, 2.0).value >= small.value
    with pytest.raises(ValueError):
        approx_space_seminorm([(1, 1.0), (3, 0.5)], 1.0, 1.0)
    with pytest.raises(ValueError):
        approx_space_seminorm(table, 0.0, 1.0)


def test_seminorm_lorentz_band():
    tau, p, q = 0.8, 2.0, 1.5
    gamma = 1 / tau - 1 / p
    ratios = []
    for scale in range(4, 14):
        N = 2 ** scale
        seq = np.arange(1, N + 1) ** (-1 / tau)
        tail = np.sqrt(np.cumsum((seq ** 2)[::-1])[::-1])
        table = [(m, tail[m] if m < N else 0.0) for m in range(1, N + 1)]
        ratios.append(approx_space_seminorm(table, gamma, q).value / lorentz_norm(seq, tau, q))
    assert max(ratios) / min(ratios) < 1.5


def test_jackson_r_regimes():
    assert jackson_r(2.5, 0.8, 2, 2) == 0.0
    assert jackson_r(2.5, 0.8, 2, 1) == pytest.approx(2.5 * 0.2 / 0.8)
    with pytest.raises(ParameterError):
        jackson_r(2, 0.0, 2, 1)


def test_pure_sequence_slope():
    tau, p = 0.8, 2.0
    c = line(np.arange(1, 2 ** 12 + 1) ** (-1 / tau))
    m = [2 ** i for i in range(3, 11)]
    sig = [r.sigma for r in sigma_m_curve(c, plain(p), m)]
    assert fit_slope(m, sig) == pytest.approx(-(1 / tau - 1 / p), abs=0.03)


def test_jackson_rejects_bad_balance():
    with pytest.raises(ParameterError):
        jackson_experiment(SPEC, 2.0, 1.0, 1.0, 2.0, 2.0, trials=1)
    with pytest.raises(ParameterError):
        jackson_experiment(SPEC, 1.0, 3.0, 1.0, 2.0, 2.0, trials=1)
    with pytest.raises(ValueError):
        jackson_experiment(SPEC, 2.25, 1.0, 1.0, 2.0, 2.0, m_grid=[4, 2])


def test_jackson_small_run():
    rep = jackson_experiment(SPEC, 2.25, 1.0, 1.0, 2.0, 2.0, m_grid=[2 ** i for i in range(9)],
                             trials=2, oversize=4)
    assert rep.predicted_slope == -0.5
    assert abs(rep.fitted_slope - rep.predicted_slope) < 0.15
    assert len(rep.rows()) == 2 * 9 and len(rep.lower_slopes) == 2


def test_same_delta_tiles():
    ids = same_delta_tiles(SPEC, 2, 8)
    lengths = {tuple(np.round(rect_at(2, k, SPEC).lengths, 10)) for k in ids}
    assert len(ids) == 8 and len(lengths) == 1


def test_bernstein_relation_checks():
    with pytest.raises(ParameterError):
        bernstein_check_relation(2.5, 1.0, 2.0, 2, 2, 1, 1, 1)
    with pytest.raises(ParameterError):
        bernstein_check_relation(2.5, 2.25, 1.0, 2, 2, 1, 2, 1)
    with pytest.raises(ValueError):
        bernstein_check_relation(2.5, 2.25, 1.0, 2, 2, 1, 1, 3)
    bernstein_check_relation(2.5, 2.25, 1.0, 2, 2, 1, 1, 1)
    bernstein_check_relation(2.5, 2.25, 1.0, 2, 2, 1, 1, 2)


def test_bernstein_closed_forms():
    g_params = (2.25, 1.0, 2.0, 2.0, 1.0, 1.0)
    one = CoefficientSet.from_entries(SPEC, {(3, 2, (1, 4)): -2.5})
    assert bernstein_ratio(one, SPEC, *g_params, 1) == pytest.approx(1.0, rel=1e-12)
    tiles = same_delta_tiles(SPEC, 3, 16)
    for n in (2, 7, 16):
        eq = CoefficientSet.from_entries(SPEC, {(3, k, (0, 0)): 1.0 for k in tiles[:n]})
        assert bernstein_ratio(eq, SPEC, *g_params, 1) == pytest.approx(1.0, rel=1e-12)


def test_bernstein_small_run():
    rep = bernstein_experiment(SPEC, 2.25, 1.0, 2.0, 2.0, 1.0, n_grid=[4, 8, 16, 32], trials=3)
    assert all(r <= 1 + 1e-12 for r in rep.max_ratio)
    assert rep.slope <= 0.05
    with pytest.raises(ParameterError):
        bernstein_experiment(FLAT, 2.25, 1.0, 2.0, 2.0, 1.0, variant=2)


def test_random_n_term_distinct():
    g = random_n_term(SPEC, 50, np.random.default_rng(0))
    assert len(g) == 50


def test_counting_singleton_and_skips():
    spec = CoveringSpec(0.5, Anisotropy((1, 1)))
    nu, alpha = 2.0, 0.5
    r = rect_at(3, 5, spec)
    single = CoefficientSet.from_entries(spec, {(3, 5, (2, 1)): 1.0})
    center = np.pi * (np.array([2, 1]) + 0.5) / r.lengths
    far = center + 50.0
    for q in (0.5, 1.0, 2.0):
        rep = counting_bound_check(spec, single, q, sample_pts=[center, far])
        assert rep.constant == pytest.approx(r.measure ** (-nu * (1 - alpha) / alpha), rel=1e-12)
        assert rep.points == 1 and rep.skipped == 1


def test_counting_explicit_matches_box():
    spec = CoveringSpec(0.5, Anisotropy((1, 1)))
    side = 6.0
    box = BoxIndexSet(spec, range(1, 4), side)
    entries = {}
    for j in range(1, 4):
        for r in build_layer(j, spec):
            lim = np.ceil(side * r.lengths / np.pi - 0.5).astype(int)
            for n in np.ndindex(*lim):
                entries[(j, r.index, n)] = 1.0
    explicit = CoefficientSet.from_entries(spec, entries)
    assert box.size == len(explicit)
    pts = np.random.default_rng(1).uniform(0, side, (3000, 2))
    a = counting_bound_check(spec, box, 1.0, sample_pts=pts)
    b = counting_bound_check(spec, explicit, 1.0, sample_pts=pts)
    assert a.constant == pytest.approx(b.constant, rel=1e-12)


def test_counting_needs_positive_alpha():
    with pytest.raises(ParameterError):
        counting_bound_check(FLAT, BoxIndexSet(FLAT, [1], 2.0), 1.0)


def test_writers(tmp_path):
    p = write_rate_csv(tmp_path / "r.csv", [{"m": 1, "sigma": 0.5}, {"m": 2, "sigma": 0.25}])
    assert p.read_text().splitlines() == ["m,sigma", "1,0.5", "2,0.25"]
    j = write_json(tmp_path / "r.json", {"b": 1, "a": np.float64(2.0)})
    assert j.read_text().index('"a"') < j.read_text().index('"b"')
