"""Tests for synthetic dataset generation."""

import numpy as np
import pytest

from spftrack.simulate import (
    GroundTruth,
    SimConfig,
    generate_dataset,
    read_truth,
    render_frame,
    sample_visibility,
    scatter_cells,
    simulate_positions,
    write_truth,
)
from spftrack.tree import build_cell_tree


def _small_cfg(**kwargs):
    defaults = dict(dims=(40, 20, 6), frames=6, seed=0)
    defaults.update(kwargs)
    return SimConfig(**defaults)


# --- config validation ---


def test_config_rejects_bad_values():
    with pytest.raises(ValueError, match="frames"):
        SimConfig(frames=0)
    with pytest.raises(ValueError, match="dims"):
        SimConfig(dims=(10, 10))
    with pytest.raises(ValueError, match="dtype"):
        SimConfig(dtype="f32")
    with pytest.raises(ValueError, match="p_drop"):
        SimConfig(p_drop=1.5)
    with pytest.raises(ValueError, match="psf_axes"):
        SimConfig(psf_axes=(0.0, 6.0, 3.0))


def test_config_from_dict_coerces_types():
    cfg = SimConfig.from_dict(
        {
            "dims": "64,32,8",
            "frames": "6",
            "sigma_step": "1 2 0.5",
            "root_fixed": "false",
            "p_drop": "0.1",
            "dtype": "u16",
        }
    )
    assert cfg.dims == (64, 32, 8)
    assert cfg.frames == 6
    assert cfg.sigma_step == (1.0, 2.0, 0.5)
    assert cfg.root_fixed is False
    assert cfg.p_drop == 0.1
    assert cfg.dtype == "u16"


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        SimConfig.from_dict({"speed": "3"})


# --- initial layout ---


def test_scatter_respects_distance_and_bounds():
    cfg = SimConfig(dims=(200, 100, 10), frames=1, seed=4)
    pts = scatter_cells(30, cfg, np.random.default_rng(4))
    assert pts.shape == (30, 3)
    diff = pts[:, None] - pts[None, :]
    d = np.sqrt((diff**2).sum(axis=2))
    d[np.diag_indices(30)] = np.inf
    assert d.min() >= cfg.scatter_min_dist
    mx = cfg.scatter_margin * 200
    assert pts[:, 0].min() >= mx and pts[:, 0].max() <= 200 - mx
    assert pts[:, 1].min() >= 0 and pts[:, 1].max() <= 100
    # z is physical: premultiplied by z_scale and kept off the outer slices
    assert pts[:, 2].min() >= 2.0 * cfg.z_scale
    assert pts[:, 2].max() <= (10 - 3.0) * cfg.z_scale


def test_scatter_raises_when_volume_too_crowded():
    cfg = SimConfig(dims=(30, 20, 6), frames=1, scatter_min_dist=25.0)
    with pytest.raises(ValueError, match="could not place"):
        scatter_cells(10, cfg, np.random.default_rng(0))


# --- motion ---


def _line_layout():
    init = np.array([[10.0, 10.0, 6.0], [18.0, 10.0, 6.0], [26.0, 10.0, 6.0]])
    return init, build_cell_tree(init)


def test_root_holds_still_by_default():
    init, tree = _line_layout()
    cfg = _small_cfg(frames=8)
    pos = simulate_positions(init, tree, cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(pos[:, tree.root], np.tile(init[tree.root], (8, 1)))


def test_root_walks_when_not_fixed():
    init, tree = _line_layout()
    cfg = _small_cfg(frames=8, root_fixed=False)
    pos = simulate_positions(init, tree, cfg, np.random.default_rng(3))
    assert np.abs(pos[1:, tree.root] - init[tree.root]).max() > 0


def test_zero_noise_keeps_initial_layout():
    # with no noise the blended offset is a fixed point at the initial
    # offsets, so every frame reproduces the starting layout
    init, tree = _line_layout()
    cfg = _small_cfg(frames=8, sigma_step=(0.0, 0.0, 0.0))
    pos = simulate_positions(init, tree, cfg, np.random.default_rng(0))
    np.testing.assert_allclose(pos, np.broadcast_to(init, pos.shape), atol=1e-9)


def test_positions_match_replayed_offset_recursion():
    # re-derive the sweep with a second generator seeded identically: one
    # 3-vector draw per non-root cell per frame, consumed in tree order
    init, tree = _line_layout()
    cfg = _small_cfg(frames=6, sigma_step=(0.5, 0.4, 0.1))
    pos = simulate_positions(init, tree, cfg, np.random.default_rng(7))
    rng = np.random.default_rng(7)
    sigma = np.asarray(cfg.sigma_step)
    expect = np.empty_like(pos)
    expect[0] = init
    for t in range(1, cfg.frames):
        expect[t, tree.root] = expect[t - 1, tree.root]
        for k in tree.order:
            if k == tree.root:
                continue
            u = tree.parent[k]
            eta_prev = expect[t - 1, k] - expect[t - 1, u]
            eta_init = init[k] - init[u]
            blend = cfg.alpha * eta_prev + (1.0 - cfg.alpha) * eta_init
            expect[t, k] = expect[t, u] + blend + rng.normal(0.0, 1.0, 3) * sigma
    np.testing.assert_array_equal(pos, expect)


# --- visibility ---


def test_visibility_first_frame_full_and_rate_matches():
    cfg = _small_cfg(p_drop=0.25)
    vis = sample_visibility(4001, 3, cfg, np.random.default_rng(5))
    assert vis[0].all()
    hidden = 1.0 - vis[1:].mean(axis=0)
    # binomial std at n=4000 is ~0.007; every cell, root included, drops
    assert np.abs(hidden - 0.25).max() < 0.03


def test_visibility_degenerate_rates():
    cfg0 = _small_cfg(p_drop=0.0)
    assert sample_visibility(50, 4, cfg0, np.random.default_rng(1)).all()
    cfg1 = _small_cfg(p_drop=1.0)
    vis = sample_visibility(50, 4, cfg1, np.random.default_rng(1))
    assert vis[0].all() and not vis[1:].any()


# --- rendering ---


def test_render_peak_value_at_center_voxel():
    cfg = _small_cfg()
    frame = render_frame(np.array([[10.0, 8.0, 9.0]]), np.array([True]), cfg)
    assert frame.shape == (6, 20, 40)
    assert frame.dtype == np.uint8
    # center sits exactly on voxel (z=9/3, y=8, x=10)
    assert frame[3, 8, 10] == 200


def test_render_truncates_outside_unit_ellipsoid():
    cfg = _small_cfg()  # psf_axes (9, 6, 3) -> x reach 3
    frame = render_frame(np.array([[10.0, 8.0, 9.0]]), np.array([True]), cfg)
    assert frame[3, 8, 13] == 0  # d^2 = 9/9 = 1, outside the open support
    assert frame[3, 8, 12] == np.rint(200 * np.exp(-0.5 * 4.0 / 9.0))


def test_render_divides_z_by_scale():
    cfg = _small_cfg()
    frame = render_frame(np.array([[10.0, 8.0, 12.0]]), np.array([True]), cfg)
    assert frame[4, 8, 10] == 200
    assert frame[3, 8, 10] < 200


def test_render_overlap_takes_voxelwise_maximum():
    cfg = _small_cfg()
    pa = np.array([[10.0, 8.0, 9.0]])
    pb = np.array([[12.0, 8.0, 9.0]])
    both = np.concatenate([pa, pb])
    fa = render_frame(pa, np.array([True]), cfg)
    fb = render_frame(pb, np.array([True]), cfg)
    fboth = render_frame(both, np.array([True, True]), cfg)
    np.testing.assert_array_equal(fboth, np.maximum(fa, fb))


def test_render_clips_to_dtype_range():
    cfg = _small_cfg(peak_intensity=300.0)
    frame = render_frame(np.array([[10.0, 8.0, 9.0]]), np.array([True]), cfg)
    assert frame[3, 8, 10] == 255
    cfg16 = _small_cfg(peak_intensity=300.0, dtype="u16")
    frame16 = render_frame(np.array([[10.0, 8.0, 9.0]]), np.array([True]), cfg16)
    assert frame16.dtype == np.uint16
    assert frame16[3, 8, 10] == 300


def test_render_skips_hidden_and_offgrid_cells():
    cfg = _small_cfg()
    pos = np.array([[10.0, 8.0, 9.0], [20.0, 8.0, 9.0]])
    frame = render_frame(pos, np.array([False, False]), cfg)
    assert not frame.any()
    far = render_frame(np.array([[-10.0, 8.0, 9.0]]), np.array([True]), cfg)
    assert not far.any()


def test_render_handles_cell_near_boundary():
    cfg = _small_cfg()
    frame = render_frame(np.array([[0.5, 0.5, 0.0]]), np.array([True]), cfg)
    assert frame.any()


# --- dataset assembly ---


def test_generate_dataset_is_deterministic():
    cfg = _small_cfg(dims=(120, 60, 8), frames=4, seed=9)
    vol_a, truth_a = generate_dataset(cfg, k_count=5)
    vol_b, truth_b = generate_dataset(cfg, k_count=5)
    np.testing.assert_array_equal(vol_a.voxels, vol_b.voxels)
    np.testing.assert_array_equal(truth_a.positions, truth_b.positions)
    np.testing.assert_array_equal(truth_a.visible, truth_b.visible)


def test_generate_dataset_streaming_matches_in_memory(tmp_path):
    cfg = _small_cfg(dims=(120, 60, 8), frames=4, seed=9)
    vol_mem, truth_mem = generate_dataset(cfg, k_count=5)
    path = tmp_path / "sim.spfv"
    vol_disk, truth_disk = generate_dataset(cfg, k_count=5, volume_path=path)
    np.testing.assert_array_equal(np.asarray(vol_disk.voxels), vol_mem.voxels)
    assert vol_disk.z_scale == vol_mem.z_scale
    np.testing.assert_array_equal(truth_disk.positions, truth_mem.positions)


def test_generate_dataset_uses_explicit_init():
    init, _ = _line_layout()
    cfg = _small_cfg(frames=3)
    vol, truth = generate_dataset(cfg, init=init)
    np.testing.assert_array_equal(truth.positions[0], init)
    assert len(truth.tree.nodes) == 3
    assert vol.dims == (3, 6, 20, 40)


def test_generate_dataset_needs_init_or_count():
    with pytest.raises(ValueError, match="k_count"):
        generate_dataset(_small_cfg())


# --- truth files ---


def test_truth_file_round_trip(tmp_path):
    cfg = _small_cfg(frames=4, seed=2)
    _, truth = generate_dataset(cfg, k_count=4)
    path = tmp_path / "truth.txt"
    write_truth(path, truth)
    lines = path.read_text().splitlines()
    assert lines[0] == "# z_scale = 3.0"
    assert lines[1] == f"# root = {truth.tree.root}"
    positions, visible, z_scale = read_truth(path)
    assert z_scale == 3.0
    np.testing.assert_allclose(positions, truth.positions, atol=1e-9)
    np.testing.assert_array_equal(visible, truth.visible)


def test_truth_file_stores_z_in_index_units(tmp_path):
    init = np.array([[10.0, 8.0, 9.0], [18.0, 8.0, 9.0]])
    truth = GroundTruth(
        positions=init[None],
        visible=np.ones((1, 2), dtype=bool),
        tree=build_cell_tree(init),
        config=_small_cfg(frames=1),
    )
    path = tmp_path / "truth.txt"
    write_truth(path, truth)
    row = [l for l in path.read_text().splitlines() if not l.startswith("#")][0]
    assert float(row.split()[4]) == 3.0  # physical 9.0 over z_scale 3


def test_read_truth_rejects_bad_files(tmp_path):
    path = tmp_path / "truth.txt"
    path.write_text("# z_scale = 3.0\n0 0 1.0 2.0 3.0\n")
    with pytest.raises(ValueError, match="malformed"):
        read_truth(path)
    path.write_text("# z_scale = 3.0\n")
    with pytest.raises(ValueError, match="no data rows"):
        read_truth(path)
    path.write_text("0 0 1.0 2.0 3.0 1\n1 1 1.0 2.0 3.0 1\n")
    with pytest.raises(ValueError, match="missing"):
        read_truth(path)
