"""Acceptance gate: one group of checks per criterion, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py`` for a PASS/FAIL line per criterion at the end of
the report (the same summary appears after a full-suite run).
"""

import time

import numpy as np
import pytest

from faceflow import io as fio
from faceflow.cli import main
from faceflow.losses import (AvgPoolPyramid, LossWeights, appearance_loss, reconstruction_loss,
                             total_loss)
from faceflow.morphable_model import (Coefficients, load_model, random_model, recombine,
                                      reconstruct_shape, save_model, synthetic_face_model)
from faceflow.rasterizer import rasterize_projected
from faceflow.rcn import (ALPHA_INIT, BETA_INIT, RcnParams, finite_difference_check, rcn_forward)
from faceflow.sampling import DatasetManifest, Provenance, sample_stream
from faceflow.temporal_flow import (FramePairGeometry, dense_flow, sparse_flow, temporal_loss,
                                    visibility_prev, interpolate_flow, warp)

from fixtures import random_flow_scene, translated_face_pair, translated_plane_pair, write_scene
from oracles import (dense_flow_oracle, distance_to_edges, l1_loop, mse_loop, raster_oracle,
                     random_soup, rcn_scalar_oracle)


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# --- 1 -------------------------------------------------------------------------------

C1 = criterion(1, "blendshape linearity and self-recombination")


@C1
def test_c1_linearity_and_recombination():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(100):
        k_id, k_exp = rng.integers(1, 6, size=2)
        n_vert = int(rng.integers(3, 40))
        model = random_model(rng, n_vertices=n_vert, n_triangles=int(rng.integers(1, 10)),
                             k_id=int(k_id), k_exp=int(k_exp))
        c1 = Coefficients(rng.normal(size=k_id), rng.normal(size=k_exp))
        c2 = Coefficients(rng.normal(size=k_id), rng.normal(size=k_exp))
        both = Coefficients(c1.alpha_id + c2.alpha_id, c1.alpha_exp + c2.alpha_exp)
        mean = model.mean_shape
        lhs = reconstruct_shape(model, both).vertices - mean
        rhs = (reconstruct_shape(model, c1).vertices - mean) + (reconstruct_shape(model, c2).vertices - mean)
        assert np.abs(lhs - rhs).max() <= 1e-10
        assert np.abs(recombine(model, c1, c1).vertices - reconstruct_shape(model, c1).vertices).max() <= 1e-10
        mixed = recombine(model, c1, c2).vertices
        expected = mean + model.id_basis @ c1.alpha_id + model.exp_basis @ c2.alpha_exp
        assert np.abs(mixed - expected).max() <= 1e-10
    assert time.perf_counter() - start < 1.0


# --- 2 -------------------------------------------------------------------------------

C2 = criterion(2, "rasterizer agrees with the exhaustive per-pixel oracle")


@C2
def test_c2_rasterizer_oracle():
    start = time.perf_counter()
    for seed in range(25):
        rng = np.random.default_rng(1000 + seed)
        verts, tris = random_soup(rng, n_tri=int(rng.integers(5, 51)), size=64)
        out = rasterize_projected(verts, tris, None, 64, 64)
        oracle = raster_oracle(verts, tris, 64, 64)
        clear = ~oracle["ambiguous"]
        assert np.array_equal(out.mask[clear], oracle["winner"][clear] >= 0)
        assert np.array_equal(out.tri_index[clear], oracle["winner"][clear])
        cov = clear & out.mask
        assert np.abs(out.depth[cov] - oracle["depth"][cov]).max(initial=0) <= 1e-6
        differ = ~clear & ((out.tri_index != oracle["winner"]) | (out.mask != (oracle["winner"] >= 0)))
        for r, c in np.argwhere(differ):
            tie = out.mask[r, c] and abs(out.depth[r, c] - oracle["depth"][r, c]) <= 1e-6
            assert tie or distance_to_edges(verts, tris, r, c) <= 1.0
    assert time.perf_counter() - start < 30.0


# --- 3 -------------------------------------------------------------------------------

C3 = criterion(3, "dense flow and visibility")


@C3
def test_c3_static_mesh_is_zero():
    field = dense_flow(translated_face_pair(0.0, 0.0))
    assert np.all(field.flow == 0) and np.all(field.final == 0)


@C3
@pytest.mark.parametrize("dx,dy", [(1.5, -0.75), (-2.25, 3.0), (0.3, 0.1)])
def test_c3_rigid_translation(dx, dy):
    for geom in (translated_plane_pair(dx, dy), translated_face_pair(dx, dy)):
        final = dense_flow(geom).final
        support = np.any(final != 0, axis=2)
        assert support.sum() > 100
        assert np.abs(final[support] - [dx, dy, 0.0]).max() <= 1e-6


@C3
def test_c3_oracle_agreement():
    start = time.perf_counter()
    for seed in range(25):
        v_t, v_prev, tris = random_flow_scene(seed)
        geom = FramePairGeometry.from_projected(v_t, v_prev, tris, 64, 64)
        field = dense_flow(geom)
        oracle = dense_flow_oracle(v_t, v_prev, tris, 64, 64, geom.depth_eps())
        covered = geom.raster_t.mask | (oracle["raster_t"]["winner"] >= 0)
        agree = (np.all(np.abs(field.final - oracle["final"]) < 1e-9, axis=2)
                 & (field.vis_t == oracle["vis_t"]) & (field.vis_prev == oracle["vis_prev"]))
        assert agree[covered].mean() >= 0.99, f"seed {seed}: {agree[covered].mean():.4f}"
    assert time.perf_counter() - start < 60.0


@C3
def test_c3_occlusion_two_planes():
    bg = np.array([[-2.0, -2.0, 0.0], [30.0, -2.0, 0.0], [30.0, 30.0, 0.0], [-2.0, 30.0, 0.0]])
    occ_prev = np.array([[5.5, 7.5, 2.0], [17.5, 7.5, 2.0], [17.5, 15.5, 2.0], [5.5, 15.5, 2.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]])
    geom = FramePairGeometry.from_projected(np.vstack([bg, occ_prev - [200.0, 0, 0]]),
                                            np.vstack([bg, occ_prev]), tris, 24, 24)
    vis = visibility_prev(geom, interpolate_flow(geom))
    ys, xs = np.mgrid[0:24, 0:24]
    # a background point (depth 0) is hidden at t-1 exactly where the z=2 plane covers its pixel
    occluded = (xs > 5.5) & (xs < 17.5) & (ys > 7.5) & (ys < 15.5)
    assert np.array_equal(vis, ~occluded)


# --- 4 -------------------------------------------------------------------------------

C4 = criterion(4, "warp and temporal loss")


@C4
def test_c4_warp_identity():
    rng = np.random.default_rng(4)
    for shape in [(7, 9), (5, 6, 3), (1, 1, 3)]:
        img = rng.normal(size=shape) * 100
        assert np.array_equal(warp(img, np.zeros(shape[:2] + (3,))), img)


@C4
def test_c4_one_pixel_shift_interior():
    y_t = np.random.default_rng(5).random((12, 14, 3))
    y_prev = np.zeros_like(y_t)
    y_prev[:, :-1] = y_t[:, 1:]
    flow = np.tile([1.0, 0.0, 0.0], (12, 14, 1))
    assert temporal_loss(y_t, y_prev, flow, region="interior") < 1e-12


@C4
def test_c4_zero_flow_is_plain_mse():
    rng = np.random.default_rng(6)
    a, b = rng.random((9, 8, 3)), rng.random((9, 8, 3))
    assert abs(temporal_loss(a, b, np.zeros((9, 8, 3))) - mse_loop(b, a)) <= 1e-12


# --- 5 -------------------------------------------------------------------------------

C5 = criterion(5, "RCN forward, identity collapse, gradients, defaults")


def _rcn_instance(rng, channels, size):
    u = rng.normal(size=(channels,) + size)
    t = rng.normal(0.5, 2.0, size=(channels,) + size)
    h = np.zeros(size)
    while h.sum() < 2 or (1 - h).sum() < 2:
        h = (rng.random(size) < 0.5).astype(float)
    return u, t, h


@C5
def test_c5_rcn():
    start = time.perf_counter()
    rng = np.random.default_rng(55)
    for _ in range(50):
        channels = int(rng.integers(1, 4))
        size = (int(rng.integers(2, 6)), int(rng.integers(2, 6)))
        u, t, h = _rcn_instance(rng, channels, size)
        alpha, beta = rng.random(channels), rng.random(channels)
        expected = rcn_scalar_oracle(u.tolist(), t.tolist(), h.tolist(), alpha.tolist(), beta.tolist())
        assert np.abs(rcn_forward(u, t, h, RcnParams(alpha, beta)) - expected).max() <= 1e-10

    for _ in range(20):
        u, t, h = _rcn_instance(rng, 3, (5, 5))
        fm, bm = h.astype(bool), ~h.astype(bool)
        for c in range(3):
            z = t[c][bm]
            t[c][bm] = (z - z.mean()) / z.std() * u[c][fm].std() + u[c][fm].mean()
        a, b = rng.random(2)
        out = rcn_forward(u, t, h, RcnParams(np.full(3, a), np.full(3, b)))
        assert np.abs(out - (u * h + t * (1 - h))).max() <= 1e-9

    for seed in range(20):
        report = finite_difference_check(seed=seed)
        assert max(report.values()) < 1e-4, (seed, report)
    assert time.perf_counter() - start < 30.0


@C5
def test_c5_default_initialisation():
    assert (ALPHA_INIT, BETA_INIT) == (0.8, 0.1)
    params = RcnParams.default(6)
    assert np.all(params.alpha == 0.8) and np.all(params.beta == 0.1)


# --- 6 -------------------------------------------------------------------------------

C6 = criterion(6, "dynamic triplet sampling")


@C6
def test_c6_sampling():
    m = DatasetManifest.from_frame_counts([12, 30, 7, 2, 19, 45, 3, 8])
    draws = list(sample_stream(m, 0.5, 0, 10_000))
    intra = sum(t.provenance is Provenance.INTRA for t in draws)
    assert 0.47 <= intra / 10_000 <= 0.53
    violations = 0
    for trip in draws:
        for p in trip.pairs:
            violations += not (2 <= p.frame <= m.videos[p.video].frames and p.prev_frame == p.frame - 1)
        videos = {p.video for p in trip.pairs}
        violations += len(videos) != (1 if trip.provenance is Provenance.INTRA else 3)
    assert violations == 0
    assert all(t.provenance is Provenance.INTER for t in sample_stream(m, 0.0, 1, 2000))
    assert all(t.provenance is Provenance.INTRA for t in sample_stream(m, 1.0, 1, 2000))


# --- 7 -------------------------------------------------------------------------------

C7 = criterion(7, "loss arithmetic")


@C7
def test_c7_losses():
    assert LossWeights() == LossWeights(10.0, 1.0, 10.0, 5.0)
    assert total_loss(1.0, 1.0, 1.0, 1.0) == 26.0
    rng = np.random.default_rng(7)
    for _ in range(5):
        a, b = rng.random((6, 8, 3)), rng.random((6, 8, 3))
        assert reconstruction_loss(a, b, "inter") == 0.0
        assert abs(reconstruction_loss(a, b, "intra") - l1_loop(a, b)) <= 1e-12
        assert abs(appearance_loss(lambda x: x, a, b) - l1_loop(a, b)) <= 1e-12
        pyr_a, pyr_b = AvgPoolPyramid(2)(a), AvgPoolPyramid(2)(b)
        flat_a = np.concatenate([p.ravel() for p in pyr_a])
        flat_b = np.concatenate([p.ravel() for p in pyr_b])
        assert abs(appearance_loss(AvgPoolPyramid(2), a, b) - l1_loop(flat_a, flat_b)) <= 1e-12


# --- 8 -------------------------------------------------------------------------------

C8 = criterion(8, "sparse flow support is a strict subset of dense")


@C8
@pytest.mark.parametrize("dx,dy", [(1.5, -0.75), (2.0, 1.0), (-0.6, 0.4)])
def test_c8_sparse_subset(dx, dy):
    geom = translated_plane_pair(dx, dy)
    sparse = np.any(sparse_flow(geom).final != 0, axis=2)
    dense = np.any(dense_flow(geom).final != 0, axis=2)
    assert sparse.any()
    assert not (sparse & ~dense).any()
    assert dense.sum() > sparse.sum()


# --- 9 -------------------------------------------------------------------------------

C9 = criterion(9, "determinism and file formats")


def _snapshot(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def _twice(argv, out_dir, capsys):
    """Run a command twice; return (stdout, file snapshot) pairs of both runs."""
    runs = []
    for _ in range(2):
        capsys.readouterr()
        code = main([str(a) for a in argv])
        runs.append((code, capsys.readouterr().out, _snapshot(out_dir)))
    return runs


@C9
def test_c9_cli_reruns_are_byte_identical(tmp_path, capsys):
    cfg = write_scene(tmp_path, [(0, 0), (1.25, -0.5)])
    out = tmp_path / "out"
    out.mkdir()
    render = out / "render"
    render.mkdir()
    main(["render", "--config", str(cfg), "--out", str(render)])
    main(["flow", "--config", str(cfg), "--t", "1", "--out", str(out / "flow")])
    c0, c1 = render / "frame_0000_color.ppm", render / "frame_0001_color.ppm"
    flo = out / "flow" / "flow_0001.flo"
    commands = [
        ["render", "--config", cfg, "--out", out / "render"],
        ["flow", "--config", cfg, "--t", 1, "--out", out / "flow"],
        ["flow", "--config", cfg, "--t", 1, "--out", out / "sparse", "--mode", "sparse"],
        ["warp", "--image", c1, "--flow", flo, "--out", out / "warped.ppm"],
        ["loss", "--mode", "intra", "--y-t", c1, "--y-prev", c0, "--x-i", c0, "--x-p", c1, "--flow", flo],
        ["loss", "--mode", "inter", "--y-t", c1, "--y-prev", c0, "--x-i", c0, "--x-p", c1],
        ["rcn-check", "--seed", 3],
        ["sample-stats", "--frames", "4,5,6", "--seed", 8, "--count", 500],
        ["make-model", "--out", out / "model" / "m", "--nx", 6, "--ny", 7],
    ]
    for argv in commands:
        (code1, out1, files1), (code2, out2, files2) = _twice(argv, out, capsys)
        assert code1 == code2 == 0, argv
        assert out1 == out2, argv
        assert files1 == files2, argv


@C9
def test_c9_flo_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    flow = rng.normal(size=(17, 23, 2)).astype(np.float32)
    path = fio.write_flo(tmp_path / "f.flo", flow)
    back = fio.read_flo(path)
    assert back.tobytes() == flow.tobytes()
    fio.write_flo(tmp_path / "g.flo", back)
    assert (tmp_path / "g.flo").read_bytes() == path.read_bytes()


@C9
def test_c9_model_round_trip(tmp_path):
    model = synthetic_face_model(9, 11, 4, 3, seed=5)
    manifest, blob = save_model(model, tmp_path / "face")
    loaded = load_model(manifest)
    for name in ("mean_shape", "id_basis", "exp_basis", "triangles"):
        assert getattr(loaded, name).tobytes() == getattr(model, name).tobytes()
    save_model(loaded, tmp_path / "again")
    assert (tmp_path / "again.bin").read_bytes() == blob.read_bytes()
    assert f"V {model.n_vertices}" in manifest.read_text().splitlines()
