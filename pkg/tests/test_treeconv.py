import numpy as np
import pytest

from conftest import chain_topology, full_binary_topology
from ssnet.nn import ParamStore, finite_diff_check, sigmoid
from ssnet.treeconv import (
    PAD,
    build_tap_tables,
    forward,
    param_spec,
    spatial_backward,
    spatial_forward,
    tap_weight_names,
)


def make_params(hierarchy, seed, scale=0.5, dtype=np.float64):
    rng = np.random.default_rng(seed)
    params = ParamStore(dtype)
    for name, shape in param_spec(hierarchy):
        params.add(name, rng.uniform(-scale, scale, size=shape))
    return params


# --- tap tables --------------------------------------------------------------

def test_path_graph_taps_fill_right_with_pad():
    topo = chain_topology(6)
    h = build_tap_tables(topo, (1,))
    taps = h.taps[0]
    for v in range(5):
        assert taps[v].tolist() == [v, v + 1, PAD]
    assert taps[5].tolist() == [5, PAD, PAD]


def test_leaf_taps_are_all_pad(kinect_topology):
    h = build_tap_tables(kinect_topology)
    leaves = [j for j, kids in enumerate(kinect_topology.children) if not kids]
    assert leaves
    for taps in h.taps:
        for leaf in leaves:
            assert taps[leaf, 1] == PAD and taps[leaf, 2] == PAD


def brute_force_descendants(topology, node, depth):
    """All descendants exactly `depth` levels below `node`, left-to-right."""
    level = [node]
    for _ in range(depth):
        nxt = []
        for v in level:
            nxt.extend(topology.children[v])
        level = nxt
    return level


def test_full_binary_tree_corner_taps_match_descendant_walk():
    topo = full_binary_topology(8)
    h = build_tap_tables(topo, (1, 2, 4))
    for layer, d in enumerate((1, 2, 4)):
        taps = h.taps[layer]
        for v in range(topo.joint_count):
            desc = brute_force_descendants(topo, v, d)
            if desc:
                assert taps[v, 1] == desc[0]
                assert taps[v, 2] == desc[-1]
            else:
                assert taps[v, 1] == PAD and taps[v, 2] == PAD


def test_full_bottom_scheme_covers_all_descendants():
    topo = full_binary_topology(5)
    h = build_tap_tables(topo, (1, 2), scheme="full-bottom")
    assert h.taps[1].shape == (topo.joint_count, 5)  # self + 2^2 positions
    for v in range(topo.joint_count):
        desc = brute_force_descendants(topo, v, 2)
        got = [t for t in h.taps[1][v, 1:] if t != PAD]
        assert got == desc


def test_perception_heights_match_dilation_sums(kinect_topology):
    h = build_tap_tables(kinect_topology)
    assert h.perception_heights() == (2, 4, 8)


def test_unknown_scheme_rejected(kinect_topology):
    with pytest.raises(ValueError, match="unknown tap scheme"):
        build_tap_tables(kinect_topology, scheme="diagonal")


# --- forward ------------------------------------------------------------------

def brute_force_frame_repr(params, hierarchy, body):
    """Independent per-node loop implementation of the hierarchy."""
    J = hierarchy.joint_count
    out = hierarchy.out_channels
    acts = body.reshape(J, 3).T  # (3, J)
    collected = []
    for layer in range(hierarchy.layer_count):
        names = tap_weight_names(hierarchy, layer)
        bias = params[f"tree.layer{layer + 1}.bias"]
        new = np.zeros((out, J))
        for v in range(J):
            pre = bias.copy()
            for k in range(hierarchy.taps[layer].shape[1]):
                src = hierarchy.taps[layer][v, k]
                if src == PAD:
                    continue
                pre = pre + params[names[k]] @ acts[:, src]
            new[:, v] = pre[:out] * sigmoid(pre[out:])
        collected.append(new)
        acts = new
    stacked = np.concatenate([c.T for c in collected], axis=0)  # (3J nodes, C)
    return stacked.mean(axis=0)


def test_spatial_forward_matches_brute_force(micro_topology):
    h = build_tap_tables(micro_topology)
    params = make_params(h, seed=2)
    rng = np.random.default_rng(3)
    body = rng.normal(size=15)
    repr_fast, _ = spatial_forward(body, params, h)
    repr_slow = brute_force_frame_repr(params, h, body)
    assert np.abs(repr_fast - repr_slow).max() < 1e-6


def test_zero_parameters_give_zero_repr(micro_topology):
    h = build_tap_tables(micro_topology)
    params = ParamStore(np.float64)
    for name, shape in param_spec(h):
        params.add(name, np.zeros(shape))
    repr_vec, _ = spatial_forward(np.ones(15), params, h)
    assert np.all(repr_vec == 0)


def test_single_joint_topology_degenerates():
    import json

    from ssnet.topology import parse_topology

    topo = parse_topology(json.dumps({"root": 0, "children": {}}))
    h = build_tap_tables(topo)
    for taps in h.taps:
        assert taps[0].tolist() == [0, PAD, PAD]
    params = make_params(h, seed=4)
    body = np.array([0.3, -0.2, 0.9])
    repr_fast, _ = spatial_forward(body, params, h)
    assert repr_fast.shape == (3,)
    assert np.abs(repr_fast - brute_force_frame_repr(params, h, body)).max() < 1e-12


def test_two_body_repr_is_mean_of_single_bodies(micro_topology):
    h = build_tap_tables(micro_topology)
    params = make_params(h, seed=5)
    rng = np.random.default_rng(6)
    a, b = rng.normal(size=15), rng.normal(size=15)
    ra, _ = spatial_forward(a, params, h)
    rb, _ = spatial_forward(b, params, h)
    rab, _ = spatial_forward(np.stack([a, b]), params, h)
    assert np.allclose(rab, (ra + rb) / 2, atol=1e-12)


def test_joint_relabeling_equivariance(micro_topology):
    """Same weights on a relabeled tree give the identical representation."""
    import json

    from ssnet.topology import parse_topology

    h = build_tap_tables(micro_topology)
    params = make_params(h, seed=7)
    rng = np.random.default_rng(8)
    body = rng.normal(size=15)

    perm = np.array([2, 4, 0, 1, 3])  # new id of each old joint
    children = {}
    for j, kids in enumerate(micro_topology.children):
        if kids:
            children[str(perm[j])] = [int(perm[c]) for c in kids]
    topo2 = parse_topology(json.dumps({"root": int(perm[0]), "children": children}))
    h2 = build_tap_tables(topo2)
    body2 = body.reshape(5, 3)[np.argsort(perm)].reshape(-1)

    r1, _ = spatial_forward(body, params, h)
    r2, _ = spatial_forward(body2, params, h2)
    assert np.abs(r1 - r2).max() < 1e-12


# --- backward -----------------------------------------------------------------

def test_zero_upstream_grad_gives_zero_param_grads(micro_topology):
    h = build_tap_tables(micro_topology)
    params = make_params(h, seed=9)
    _, cache = spatial_forward(np.ones(15), params, h)
    spatial_backward(np.zeros(15), cache, params, h)
    for g in params.grads.values():
        assert np.all(g == 0)


def test_backward_matches_finite_differences(micro_topology):
    h = build_tap_tables(micro_topology)
    params = make_params(h, seed=12)
    rng = np.random.default_rng(13)
    bodies = rng.normal(size=(3, 5, 4))
    probe = rng.normal(size=(15, 4))

    def loss_fn(p):
        reprs, cache = forward(p, h, bodies)
        from ssnet.treeconv import backward

        backward(p, h, cache, probe)
        return float((reprs * probe).sum())

    report = finite_diff_check(loss_fn, params, 2e-4)
    assert max(report.values()) < 1e-6


def test_two_body_param_grads_average(micro_topology):
    h = build_tap_tables(micro_topology)
    rng = np.random.default_rng(14)
    a, b = rng.normal(size=15), rng.normal(size=15)
    g = rng.normal(size=15)

    def grads_for(bodies):
        params = make_params(h, seed=15)
        _, cache = spatial_forward(bodies, params, h)
        spatial_backward(g, cache, params, h)
        return {k: v.copy() for k, v in params.grads.items()}

    ga = grads_for(a)
    gb = grads_for(b)
    gab = grads_for(np.stack([a, b]))
    for name in ga:
        assert np.allclose(gab[name], (ga[name] + gb[name]) / 2, atol=1e-12)


def test_corners_parameter_count_kinect(kinect_topology):
    # 2*75 pre-GLU channels: layer 1 reads 3 input channels, layers 2-3 read 75.
    h = build_tap_tables(kinect_topology)
    spec = param_spec(h)
    total = sum(int(np.prod(shape)) for _, shape in spec)
    expected = (3 * 150 * 3 + 150) + 2 * (3 * 150 * 75 + 150)
    assert total == expected == 69300
