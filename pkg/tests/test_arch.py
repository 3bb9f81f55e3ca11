import numpy as np
import pytest

from joint_pruner.arch import (
    LayerMask,
    NetworkSpec,
    PruneMask,
    PruningAction,
    apply_mask,
    coupled_sets,
    enforce_group_constraint,
    export_pruned,
    layer_flops,
    load_network,
    parameter_count,
    prune_count,
    prune_summary,
    resolve_mask,
    save_network,
    total_flops,
    validate_network,
)
from joint_pruner.arch.mask import beta_key, check_mask, conv_key, gamma_key
from joint_pruner.child import ChildModel
from joint_pruner.errors import InvalidArgumentError, VersionMismatchError

from .specs import build_spec, random_action, random_gammas, random_spec


def brute_force_flops(spec: NetworkSpec, mask: PruneMask) -> int:
    """Walks the layers and counts one multiply per kernel tap, input channel and output position."""
    total = 0
    channels = spec.layers[0].in_ch
    for layer, m in zip(spec.layers, mask.layers):
        if m.removed:
            continue
        taps = layer.kernel * layer.kernel * channels
        for _ in range(layer.in_h):
            for _ in range(layer.in_w):
                for _ in m.kept_channels:
                    total += taps
        channels = len(m.kept_channels)
    return total


def random_case(rng: np.random.Generator):
    spec = random_spec(rng)
    action = enforce_group_constraint(spec, random_action(spec, rng))
    return spec, action, resolve_mask(spec, action, random_gammas(spec, rng))


# =====================================
# validate_network
# =====================================

def test_well_formed_spec_is_valid(spec):
    assert spec.num_layers == 7
    assert validate_network(spec) == []


def test_residual_shape_mismatch_is_reported(spec):
    layers = list(spec.layers)
    layers[3] = layers[3].model_copy(update={"out_ch": 6})
    broken = spec.model_copy(update={"layers": tuple(layers)})
    assert any("residual shape mismatch" in v for v in validate_network(broken))


def test_incomplete_s_frb_is_reported(spec):
    broken = NetworkSpec(layers=spec.layers, s_frb=[2], head_ids=spec.head_ids)
    assert any("s_frb incomplete" in v for v in validate_network(broken))


def test_reference_network_layout(reference_spec):
    assert validate_network(reference_spec) == []
    assert reference_spec.num_layers == 11
    assert reference_spec.head_ids == (11,)
    assert reference_spec.s_frb == (2, 4, 7, 9)
    assert [c.members for c in coupled_sets(reference_spec)] == [(0,), (1, 3, 5), (6, 8, 10)]


def test_network_document_round_trip(tmp_path, spec):
    path = tmp_path / "net.json"
    save_network(spec, path)
    assert load_network(path) == spec


def test_network_document_rejects_unknown_schema(spec):
    document = spec.to_document()
    document["schema"] = "abcp-arch/0"
    with pytest.raises(VersionMismatchError):
        NetworkSpec.from_document(document)


# =====================================
# PruningAction
# =====================================

def test_action_element_kinds_survive_json():
    action = PruningAction.from_json([0.5, 1, 1, 0.0, 0])
    assert [type(e) for e in action] == [float, int, int, float, int]
    assert action.is_pruned(1) and not action.is_pruned(4)


@pytest.mark.parametrize("element", [2, -1, 0.95, -0.1, True, float("nan")])
def test_action_rejects_bad_elements(element):
    with pytest.raises(InvalidArgumentError):
        PruningAction((0.1, element))


# =====================================
# FLOPs
# =====================================

@pytest.mark.parametrize("args, expected", [
    ((3, 416, 416, 3, 32), 149_520_384),
    ((1, 1, 1, 1, 1), 1),
    ((3, 8, 8, 16, 32), 294_912),
])
def test_layer_flops(args, expected):
    assert layer_flops(*args) == expected


@pytest.mark.parametrize("args", [(0, 8, 8, 1, 1), (3, 8, -1, 1, 1), (3, 8, 8, 2.5, 1)])
def test_layer_flops_rejects_non_positive(args):
    with pytest.raises(InvalidArgumentError):
        layer_flops(*args)


def test_identity_mask_counts_every_layer(spec):
    expected = sum(
        layer_flops(layer.kernel, layer.in_h, layer.in_w, layer.in_ch, layer.out_ch) for layer in spec.layers
    )
    assert total_flops(spec) == expected
    assert total_flops(spec, PruneMask.identity(spec)) == expected


def test_removed_block_costs_nothing():
    spec = build_spec([("ordinary", 3, 8), ("block", 1, 4, 3)], in_ch=3, size=8)
    mask = PruneMask((
        LayerMask(False, tuple(range(8)), 8),
        LayerMask(True, (), 4),
        LayerMask(True, (), 8),
    ))
    assert total_flops(spec, mask) == 8 * 8 * 3 * 3 * 3 * 8


def test_total_flops_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(25):
        spec, _, mask = random_case(rng)
        assert total_flops(spec, mask) == brute_force_flops(spec, mask)


def test_total_flops_is_monotone():
    rng = np.random.default_rng(8)
    for _ in range(50):
        spec = random_spec(rng)
        gammas = random_gammas(spec, rng)
        action = enforce_group_constraint(spec, random_action(spec, rng))
        base = total_flops(spec, resolve_mask(spec, action, gammas))
        assert base <= total_flops(spec)

        i = int(rng.integers(spec.num_layers))
        if not action.is_block_choice(i):
            raised = action.replace({i: min(0.9, action[i] + 0.3)})
            more = resolve_mask(spec, enforce_group_constraint(spec, raised), gammas)
            assert total_flops(spec, more) <= base

        firsts = [layer.id for layer in spec.layers if layer.kind.value == "block_first"]
        kept = [j for j in firsts if not action.is_pruned(j)]
        if kept:
            pruned = action.replace({kept[0]: 1, kept[0] + 1: 1})
            fewer = resolve_mask(spec, pruned, gammas)
            assert total_flops(spec, fewer) <= base


def test_mask_spec_mismatch_is_rejected(spec):
    with pytest.raises(InvalidArgumentError):
        total_flops(spec, PruneMask(PruneMask.identity(spec).layers[:-1]))


def test_parameter_count_of_identity_mask(spec):
    conv = sum(l.kernel * l.kernel * l.in_ch * l.out_ch + 2 * l.out_ch for l in spec.layers)
    assert parameter_count(spec, 3) == conv + 6 * 3 + 3


# =====================================
# enforce_group_constraint
# =====================================

def test_coupled_ratios_lift_to_their_maximum(spec):
    action = PruningAction((0.1, 0.2, 0.0, 0.5, 0.7, 0.3, 0.0))
    constrained = enforce_group_constraint(spec, action)
    assert constrained.to_json() == [0.1, 0.5, 0.0, 0.5, 0.7, 0.5, 0.0]


def test_equal_coupled_ratios_are_a_fixed_point(spec):
    action = PruningAction((0.1, 0.4, 0.2, 0.4, 0.3, 0.4, 0.0))
    assert enforce_group_constraint(spec, action) == action


def test_pruned_blocks_leave_the_entry_alone(spec):
    action = PruningAction((0.1, 0.2, 1, 1, 1, 1, 0.6))
    assert enforce_group_constraint(spec, action).to_json() == [0.1, 0.2, 1, 1, 1, 1, 0.6]


def test_group_constraint_is_idempotent_and_equalizes_coupled_sets():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        spec, action, mask = random_case(rng)
        assert enforce_group_constraint(spec, action) == action
        for coupled in coupled_sets(spec):
            counts = {mask[j].kept_count for j in coupled.members if not mask[j].removed}
            assert len(counts) == 1


# =====================================
# resolve_mask
# =====================================

def test_prune_count_floors_and_keeps_one():
    assert prune_count(0.45, 10) == 4
    assert prune_count(0.9, 1) == 0
    assert prune_count(0.3, 10) == 3


def test_resolve_mask_drops_smallest_gammas():
    spec = build_spec([("ordinary", 3, 4)])
    mask = resolve_mask(spec, PruningAction((0.5,)), [np.array([0.9, -0.05, 0.5, 0.01])])
    assert mask[0].kept_channels == (0, 2)


def test_resolve_mask_breaks_ties_by_lower_index():
    spec = build_spec([("ordinary", 3, 4)])
    mask = resolve_mask(spec, PruningAction((0.5,)), [np.ones(4)])
    assert mask[0].kept_channels == (2, 3)


def test_resolve_mask_counts():
    spec = build_spec([("ordinary", 3, 10), ("ordinary", 3, 1)])
    mask = resolve_mask(spec, PruningAction((0.45, 0.9)), [np.ones(10), np.ones(1)])
    assert mask[0].kept_count == 6
    assert mask[1].kept_count == 1


def test_resolve_mask_rejects_gamma_length_mismatch(spec):
    gammas = [np.ones(layer.out_ch) for layer in spec.layers]
    gammas[2] = np.ones(3)
    with pytest.raises(InvalidArgumentError):
        resolve_mask(spec, PruningAction.unpruned(spec), gammas)


def test_coupled_layers_rank_their_summed_gammas():
    spec = build_spec([("ordinary", 3, 4), ("block", 1, 2, 3)])
    gammas = [np.array([1.0, 0.0, 0.0, 0.2]), np.ones(2), np.array([0.0, 0.9, 0.3, 0.0])]
    mask = resolve_mask(spec, PruningAction((0.5, 0.0, 0.5)), gammas)
    # alone, layer 0 would keep (0, 3) and layer 2 would keep (1, 2)
    assert mask[0].kept_channels == mask[2].kept_channels == (0, 1)
    assert mask[1].kept_channels == (0, 1)


def test_coupled_layers_keep_identical_channels(reference_spec):
    rng = np.random.default_rng(11)
    action = PruningAction(tuple(0.5 for _ in reference_spec.layers))
    mask = resolve_mask(reference_spec, action, random_gammas(reference_spec, rng))
    live = set().union(*(mask[j].kept_channels for j in (1, 3, 5)))
    assert len(live) == mask[1].kept_count == 16

    for _ in range(1000):
        spec, _, mask = random_case(rng)
        for coupled in coupled_sets(spec):
            kept = {mask[j].kept_channels for j in coupled.members if not mask[j].removed}
            assert len(kept) == 1


def test_check_mask_rejects_coupled_layers_that_disagree():
    spec = build_spec([("ordinary", 3, 4), ("block", 1, 2, 3)])
    head = LayerMask(False, (0, 1), 2)
    with pytest.raises(InvalidArgumentError):
        check_mask(spec, PruneMask((LayerMask(False, (0, 1), 4), head, LayerMask(False, (2, 3), 4))))
    with pytest.raises(InvalidArgumentError):
        total_flops(spec, PruneMask((LayerMask(False, (0, 1, 2), 4), head, LayerMask(False, (0, 1), 4))))
    assert check_mask(spec, PruneMask((LayerMask(False, (0, 3), 4), head, LayerMask(False, (0, 3), 4))))


# =====================================
# apply_mask
# =====================================

def test_apply_mask_is_idempotent_and_zeroes_dropped_channels(rng):
    for _ in range(20):
        spec, _, mask = random_case(rng)
        weights = ChildModel.initialize(spec, 3, rng).weights
        once = apply_mask(weights, mask)
        twice = apply_mask(once, mask)
        assert once.keys() == twice.keys()
        for key in once:
            assert np.array_equal(once[key], twice[key])
        for j, m in enumerate(mask.layers):
            dropped = m.dropped_channels()
            for key in (conv_key(j), gamma_key(j), beta_key(j)):
                assert not np.any(once[key][dropped])


def test_apply_identity_mask_changes_nothing(spec, micro_model):
    masked = apply_mask(micro_model.weights, PruneMask.identity(spec))
    for key, value in micro_model.weights.items():
        assert np.array_equal(masked[key], value)
        assert masked[key] is not value


def test_removed_block_is_all_zero(spec, micro_model):
    action = PruningAction((0.0, 0.0, 1, 1, 0.0, 0.0, 0.0))
    mask = resolve_mask(spec, action, micro_model.bn_gammas())
    masked = apply_mask(micro_model.weights, mask)
    for j in (2, 3):
        for key in (conv_key(j), gamma_key(j), beta_key(j)):
            assert not np.any(masked[key])


# =====================================
# export_pruned
# =====================================

def test_export_of_identity_mask_is_the_same_network(spec):
    assert export_pruned(spec, PruneMask.identity(spec)) == spec


def test_export_drops_pruned_block(spec):
    action = PruningAction((0.0, 0.0, 1, 1, 0.0, 0.0, 0.0))
    exported = export_pruned(spec, resolve_mask(spec, action, [np.ones(l.out_ch) for l in spec.layers]))
    assert exported.num_layers == spec.num_layers - 2
    assert exported.s_frb == (2,)
    assert exported.head_ids == (5,)


def test_export_preserves_flops():
    rng = np.random.default_rng(11)
    for _ in range(20):
        spec, _, mask = random_case(rng)
        exported = export_pruned(spec, mask)
        assert validate_network(exported) == []
        assert total_flops(exported) == total_flops(spec, mask) == brute_force_flops(spec, mask)


def test_prune_summary_reports_reduction(spec):
    action = PruningAction((0.5, 0.0, 1, 1, 0.0, 0.0, 0.0))
    mask = resolve_mask(spec, action, [np.ones(l.out_ch) for l in spec.layers])
    summary = prune_summary(spec, mask)
    assert summary["removed_blocks"] == [0]
    assert summary["kept_channels"][0] == 2
    assert summary["flops_after"] < summary["flops_before"]
    assert summary["flops_reduction"] == pytest.approx(1 - summary["flops_after"] / summary["flops_before"])
