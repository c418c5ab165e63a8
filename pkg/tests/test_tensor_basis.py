import numpy as np
import pytest

from brushlets.brushlet1d import brushlet_freq_eval
from brushlets.covering import build_layer, rect_at
from brushlets.grid import GridFunction
from brushlets.quadrature import panel_rule
from brushlets.tensor_basis import (BrushIndex, active_rects, bell_identity_error, box_bells,
                                    brushlet_nd_freq_eval, enumerate_active, gram_matrix,
                                    hump_bound_ratio, layer_box, layer_projection,
                                    project_rect, projection_identities, rect_bells,
                                    tensor_projection)


def _grid(spec, j_max, h, seed):
    ext = [np.ceil((v + 2.0) / h) * h for v in layer_box(j_max + 1, spec)]
    counts = [int(round(2 * e / h)) + 1 for e in ext]
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(counts) + 1j * rng.standard_normal(counts)
    return GridFunction([(-e, e) for e in ext], counts, vals)


def test_brush_index_validation(aniso_spec):
    r = rect_at(1, 1, aniso_spec)
    with pytest.raises(ValueError):
        BrushIndex(r, (0,))
    with pytest.raises(ValueError):
        BrushIndex(r, (0, -1))
    idx = BrushIndex(r, (1, 2))
    assert idx.key == (1, 1, (1, 2))
    assert idx.hump_centers().shape == (4, 2)


def test_enumerate_low_pass_only(aniso_spec):
    (idx,) = enumerate_active(aniso_spec, 0.5, 0)
    assert idx.rect.layer == 0 and idx.n == (0, 0)


def test_enumerate_layers_zero_to_three(aniso_spec):
    idx = enumerate_active(aniso_spec, layer_box(3, aniso_spec), 0)
    assert len(idx) == 1 + 8 + 44 + 88
    assert [i.rect.layer for i in idx] == sorted(i.rect.layer for i in idx)


def test_enumerate_monotone(aniso_spec):
    sizes = [len(enumerate_active(aniso_spec, L, 0)) for L in (0.5, 2, 4, 8, 12)]
    assert sizes == sorted(sizes)
    assert len(enumerate_active(aniso_spec, 4, 1)) == 4 * sizes[2]
    with pytest.raises(ValueError):
        enumerate_active(aniso_spec, -1, 0)


def test_active_rects_meet_box(aniso_spec):
    L = 5.0
    for r in active_rects(aniso_spec, L):
        lo = np.array([b.support[0] for b in rect_bells(r)])
        hi = np.array([b.support[1] for b in rect_bells(r)])
        assert np.all(hi > -L) and np.all(lo < L)
    missing = [r for j in range(1, 4) for r in build_layer(j, aniso_spec)
               if r not in active_rects(aniso_spec, L)]
    for r in missing:
        lo = np.array([b.support[0] for b in rect_bells(r)])
        hi = np.array([b.support[1] for b in rect_bells(r)])
        assert np.any(hi <= -L) or np.any(lo >= L)


def test_nd_value_is_product(aniso_spec):
    r = rect_at(2, 5, aniso_spec)
    idx = BrushIndex(r, (2, 3))
    xi = r.center
    b1, b2 = rect_bells(r)
    expect = brushlet_freq_eval(b1, 2, xi[0]) * brushlet_freq_eval(b2, 3, xi[1])
    assert brushlet_nd_freq_eval(idx, xi) == pytest.approx(expect, rel=1e-15)
    far = r.right + 2 * aniso_spec.c7 * r.lengths
    assert brushlet_nd_freq_eval(idx, far) == 0.0


def test_nd_unit_norms(aniso_spec):
    rng = np.random.default_rng(2)
    rects = [r for j in range(4) for r in build_layer(j, aniso_spec)]
    for _ in range(10):
        r = rects[int(rng.integers(len(rects)))]
        n = tuple(int(v) for v in rng.integers(0, 8, 2))
        total = 1.0
        for bell, k in zip(rect_bells(r), n):
            x, w = panel_rule(bell.breakpoints(), 80)
            total *= float(np.sum(w * brushlet_freq_eval(bell, k, x) ** 2))
        assert total == pytest.approx(1.0, abs=1e-8)


def test_gram_small(aniso_spec):
    idx = enumerate_active(aniso_spec, layer_box(1, aniso_spec), 2)
    G = gram_matrix(idx, oversample=16)
    assert G.shape == (81, 81)
    assert np.max(np.abs(G - np.eye(81))) < 1e-8


def test_projection_fixes_basis_element(aniso_spec):
    idx = BrushIndex(rect_at(2, 3, aniso_spec), (1, 0))
    f = lambda p: brushlet_nd_freq_eval(idx, p)
    P = project_rect(idx.rect, f)
    pts = np.random.default_rng(0).uniform(-8, 8, (4000, 2))
    assert np.max(np.abs(P(pts) - f(pts))) < 1e-10


def test_distinct_tiles_orthogonal(grid_spec):
    g = _grid(grid_spec, 2, 1 / 16, 0)
    rects = build_layer(2, grid_spec)
    for r, s in [(rects[0], rects[1]), (rects[0], rects[5]), (rects[2], rects[-1])]:
        assert np.max(np.abs(project_rect(r, project_rect(s, g)).values)) < 1e-10


def test_projection_identities_grid(grid_spec):
    for seed in range(2):
        rep = projection_identities(grid_spec, _grid(grid_spec, 3, 1 / 16, seed), 3)
        assert max(rep.values()) < 1e-10, rep


def test_projection_identities_callable(aniso_spec):
    rng = np.random.default_rng(5)
    c = rng.uniform(-10, 10, (6, 2))
    f = lambda p: sum(np.exp(-np.sum((p - ci) ** 2, -1) / 3) * np.cos(p[..., 0] * k)
                      for k, ci in enumerate(c))
    pts = rng.uniform(-16, 16, (1500, 2))
    rep = projection_identities(aniso_spec, f, 3, points=pts)
    assert max(rep.values()) < 1e-10, rep


def test_partial_sum_telescopes(grid_spec):
    g = _grid(grid_spec, 3, 1 / 16, 9)
    acc = layer_projection(0, grid_spec, g)
    for j in range(1, 4):
        acc = acc + layer_projection(j, grid_spec, g)
    box = tensor_projection(box_bells(3, grid_spec), g)
    assert np.max(np.abs((acc - box).values)) < 1e-10


def test_partial_sum_reproduces_interior(grid_spec):
    ext = 8.0
    # a bump well inside the core of A_3
    bump = lambda p: np.where(np.sum(p ** 2, -1) < 4,
                              np.exp(-1 / np.maximum(1e-300, 1 - np.sum(p ** 2, -1) / 4)), 0)
    g = GridFunction.sample(bump, [(-ext, ext)] * 2, [257, 257])
    acc = layer_projection(0, grid_spec, g)
    for j in range(1, 4):
        acc = acc + layer_projection(j, grid_spec, g)
    assert np.max(np.abs((acc - g).values)) < 1e-8


def test_layer_projection_method_check(grid_spec):
    with pytest.raises(ValueError):
        layer_projection(1, grid_spec, lambda p: p[..., 0], method="other")


def test_bell_identity(aniso_spec):
    pts = np.random.default_rng(3).uniform(-15, 15, (5000, 2))
    for j in range(4):
        for r in build_layer(j, aniso_spec)[::7]:
            assert bell_identity_error(r, pts) < 1e-12


def test_hump_bound(aniso_spec):
    x = np.random.default_rng(4).uniform(-6, 6, (40, 2))
    for key, n in [((1, 2), (0, 0)), ((2, 9), (3, 1))]:
        ratio = hump_bound_ratio(BrushIndex(rect_at(*key, aniso_spec), n), x)
        assert np.all(ratio <= 1 + 1e-8)
