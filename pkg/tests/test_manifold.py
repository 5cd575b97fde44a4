import numpy as np
import pytest

from ofmkit.flow import FlowConfig
from ofmkit.manifold import (
    Embedding,
    TemplateSet,
    embed,
    estimate_parameter,
    interpolate,
    interpolate_route,
    karcher_mean,
    linear_blend,
    procrustes_residual,
)
from ofmkit.scenes import affine_image, disk_image, make_texture, textured_disk

SIDE = 96
DISK_R = 16.0


def _centroid(im):
    mask = im.data > 0.02
    ys, xs = np.nonzero(mask)
    return np.array([xs.mean(), ys.mean()])


def test_linear_blend_endpoints_and_midpoint():
    a = disk_image(SIDE, SIDE, 30.0, 48.0, DISK_R)
    b = disk_image(SIDE, SIDE, 60.0, 48.0, DISK_R)
    np.testing.assert_array_equal(linear_blend(a, b, 0.0).data, a.data)
    np.testing.assert_array_equal(linear_blend(a, b, 1.0).data, b.data)
    mid = linear_blend(a, b, 0.5)
    # ghosting: both source disks survive at half intensity
    assert mid.data[48, 30] == pytest.approx(0.5, abs=0.05)
    assert mid.data[48, 60] == pytest.approx(0.5, abs=0.05)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        linear_blend(a, b, 1.5)
    with pytest.raises(ValueError, match="shapes differ"):
        linear_blend(a, disk_image(40, 40, 20.0, 20.0, 8.0), 0.5)


def test_interpolate_translates_content():
    a = textured_disk(SIDE, SIDE, 40.0, 48.0, DISK_R, seed=3)
    b = textured_disk(SIDE, SIDE, 52.0, 48.0, DISK_R, seed=3)
    np.testing.assert_array_equal(interpolate(a, b, 0.0).data, a.data)
    mid = interpolate(a, b, 0.5)
    c = _centroid(mid)
    assert c[0] == pytest.approx(46.0, abs=0.5)
    assert c[1] == pytest.approx(48.0, abs=0.5)
    # single moved disk, not two ghosts
    assert mid.data[48, 40] < 0.9 * max(a.data[48, 40], 1e-9) or mid.data.max() > 0.5


def test_interpolate_rejects_unrelated_frames():
    a = textured_disk(SIDE, SIDE, 20.0, 20.0, 10.0, seed=1)
    b = textured_disk(SIDE, SIDE, 76.0, 76.0, 10.0, seed=2)
    with pytest.raises(ValueError, match="geodesic_nodes"):
        interpolate(a, b, 0.5)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        interpolate(a, a, -0.1)


def test_interpolate_route_endpoints_and_interior(line_images, line_graph):
    np.testing.assert_array_equal(
        interpolate_route(line_graph, 0, 2, 0.0).data, line_images[0].data
    )
    mid = interpolate_route(line_graph, 0, 2, 0.5)
    assert mid.shape == line_images[0].shape
    # halfway along a 2-hop geodesic lands near node 1's content
    assert np.abs(mid.data - line_images[1].data).mean() < np.abs(
        mid.data - line_images[2].data
    ).mean()
    same = interpolate_route(line_graph, 1, 1, 0.7)
    np.testing.assert_array_equal(same.data, line_images[1].data)


def test_embed_recovers_euclidean_configuration(rng):
    pts = rng.normal(size=(9, 2)) * 5.0
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    emb = embed(d, dim=2)
    assert isinstance(emb, Embedding)
    assert procrustes_residual(emb.coords, pts) <= 1e-7
    rebuilt = np.linalg.norm(
        emb.coords[:, None, :] - emb.coords[None, :, :], axis=-1
    )
    np.testing.assert_allclose(rebuilt, d, atol=1e-9)
    # planar configuration: spectrum dies after two directions
    assert emb.n_positive >= 2
    assert np.all(np.abs(emb.eigenvalues[2:]) <= 1e-8 * emb.eigenvalues[0])


def test_embed_sign_is_deterministic(rng):
    pts = rng.normal(size=(7, 3))
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    a = embed(d, dim=3)
    b = embed(d.copy(), dim=3)
    np.testing.assert_array_equal(a.coords, b.coords)
    for k in range(3):
        lead = np.argmax(np.abs(a.coords[:, k]))
        assert a.coords[lead, k] >= 0.0


def test_embed_validation():
    with pytest.raises(ValueError, match="square"):
        embed(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="dim"):
        embed(np.zeros((3, 3)), dim=5)
    bad = np.zeros((3, 3))
    bad[0, 1] = bad[1, 0] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        embed(bad)
    asym = np.array([[0.0, 1.0, 2.0], [1.5, 0.0, 1.0], [2.0, 1.0, 0.0]])
    with pytest.raises(ValueError, match="symmetric"):
        embed(asym)


def test_procrustes_residual_similarity_invariance(rng):
    pts = rng.normal(size=(8, 2))
    ang = 0.7
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    moved = 3.0 * pts @ rot + np.array([10.0, -4.0])
    # a perfect match cancels under the sqrt, so ~1e-8 is the floor
    assert procrustes_residual(moved, pts) <= 1e-7
    assert procrustes_residual(rng.normal(size=(8, 2)), pts) > 0.1
    with pytest.raises(ValueError, match="share shape"):
        procrustes_residual(pts, pts[:5])
    with pytest.raises(ValueError, match="zero scatter"):
        procrustes_residual(np.ones((4, 2)), pts[:4])


def test_karcher_mean_two_disks_lands_midway():
    a = textured_disk(SIDE, SIDE, 45.0, 48.0, DISK_R, seed=7)
    b = textured_disk(SIDE, SIDE, 51.0, 48.0, DISK_R, seed=7)
    res = karcher_mean([a, b], FlowConfig(alpha=0.5), tol=0.05, max_iters=30)
    assert res.converged
    c = _centroid(res.mean)
    assert c[0] == pytest.approx(48.0, abs=0.6)
    assert c[1] == pytest.approx(48.0, abs=0.6)
    assert res.final_norm == res.trace[-1]
    assert len(res.trace) == res.iterations
    assert res.final_norm <= 0.05


def test_karcher_mean_shift_equivariance():
    base = [
        textured_disk(SIDE, SIDE, 44.0, 46.0, DISK_R, seed=7),
        textured_disk(SIDE, SIDE, 52.0, 50.0, DISK_R, seed=7),
    ]
    shifted = [
        textured_disk(SIDE, SIDE, 44.0 + 6.0, 46.0 - 3.0, DISK_R, seed=7),
        textured_disk(SIDE, SIDE, 52.0 + 6.0, 50.0 - 3.0, DISK_R, seed=7),
    ]
    cfg = FlowConfig(alpha=0.5)
    m0 = karcher_mean(base, cfg, tol=0.05, max_iters=30)
    m1 = karcher_mean(shifted, cfg, tol=0.05, max_iters=30)
    delta = _centroid(m1.mean) - _centroid(m0.mean)
    assert delta[0] == pytest.approx(6.0, abs=0.3)
    assert delta[1] == pytest.approx(-3.0, abs=0.3)


def test_karcher_mean_init_override_and_validation():
    a = textured_disk(SIDE, SIDE, 46.0, 48.0, DISK_R, seed=7)
    b = textured_disk(SIDE, SIDE, 50.0, 48.0, DISK_R, seed=7)
    res = karcher_mean([a, b], FlowConfig(alpha=0.5), init=1, max_iters=20)
    assert res.init_index == 1
    given = karcher_mean([a, b], FlowConfig(alpha=0.5), init=a, max_iters=20)
    assert given.init_index is None
    single = karcher_mean([a], FlowConfig(alpha=0.5))
    assert single.iterations == 1 and single.converged
    np.testing.assert_array_equal(single.mean.data, a.data)
    with pytest.raises(ValueError, match="at least one"):
        karcher_mean([])
    with pytest.raises(ValueError, match="step"):
        karcher_mean([a], step=0.0)
    with pytest.raises(ValueError, match="reachable"):
        karcher_mean(
            [
                textured_disk(SIDE, SIDE, 16.0, 16.0, 8.0, seed=1),
                textured_disk(SIDE, SIDE, 80.0, 80.0, 8.0, seed=2),
            ]
        )


def test_estimate_translation_recovers_center():
    grid = [(38.0, 44.0), (48.0, 44.0), (58.0, 44.0)]
    templates = TemplateSet(
        kind="translation",
        images=tuple(textured_disk(SIDE, SIDE, cx, cy, DISK_R, seed=9) for cx, cy in grid),
        thetas=np.array(grid),
    )
    query = textured_disk(SIDE, SIDE, 51.3, 45.6, DISK_R, seed=9)
    res = estimate_parameter(templates, query)
    assert res.template_index == 1
    assert res.theta[0] == pytest.approx(51.3, abs=0.1)
    assert res.theta[1] == pytest.approx(45.6, abs=0.1)
    assert res.distance >= 0.0


def test_estimate_affine_recovers_small_transform():
    # thetas follow affine_image: the linear part is the offset from the
    # identity, acting about the canvas center
    tex = make_texture(160, 160, seed=21)
    a_true = np.array([[0.0, -0.05], [0.05, 0.0]])
    t_true = np.array([3.0, 1.0])
    templates = TemplateSet(
        kind="affine",
        images=(affine_image(tex, np.zeros((2, 2)), np.zeros(2)),),
        thetas=np.zeros((1, 6)),
    )
    query = affine_image(tex, a_true, t_true)
    res = estimate_parameter(templates, query)
    got = res.theta
    want = np.array([a_true[0, 0], a_true[0, 1], a_true[1, 0], a_true[1, 1], *t_true])
    scale = max(np.abs(want).max(), np.abs(t_true).max())
    assert np.max(np.abs(got - want)) <= 0.05 * scale


def test_estimate_rejects_unreachable_query():
    templates = TemplateSet(
        kind="translation",
        images=(textured_disk(SIDE, SIDE, 20.0, 20.0, 10.0, seed=3),),
        thetas=np.array([[20.0, 20.0]]),
    )
    stranger = textured_disk(SIDE, SIDE, 76.0, 76.0, 10.0, seed=4)
    with pytest.raises(ValueError, match="not flow-consistent"):
        estimate_parameter(templates, stranger)


def test_template_set_validation():
    im = textured_disk(SIDE, SIDE, 48.0, 48.0, 10.0, seed=2)
    with pytest.raises(ValueError, match="unknown template kind"):
        TemplateSet(kind="spline", images=(im,), thetas=np.zeros((1, 2)))
    with pytest.raises(ValueError, match="thetas"):
        TemplateSet(kind="translation", images=(im,), thetas=np.zeros((1, 6)))
    with pytest.raises(ValueError, match="thetas"):
        TemplateSet(kind="affine", images=(im, im), thetas=np.zeros((1, 6)))
