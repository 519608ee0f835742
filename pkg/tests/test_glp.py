from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hemlet.glp import (GLPLayerSet, MappingError, build_layersets, deinterleave, interleave,
                        layerwise_plan, make_plan)
from hemlet.workload import (MODELS, VIT_B16, VIT_L16, LayerKind, StaticLayer, ViTModelSpec,
                             concurrent, static_layers)


def test_interleave_places_member_i_column_j_at_jx_plus_i():
    a = np.array([[1, 2], [3, 4]])
    b = np.array([[5, 6], [7, 8]])
    c = np.array([[9, 10], [11, 12]])
    aug = interleave([a, b, c])
    assert aug.tolist() == [[1, 5, 9, 2, 6, 10], [3, 7, 11, 4, 8, 12]]


@settings(max_examples=60, deadline=None)
@given(x=st.integers(1, 8), rows=st.integers(1, 6), cols=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_interleave_round_trip(x, rows, cols, seed):
    rng = np.random.default_rng(seed)
    ws = [rng.integers(-99, 99, (rows, cols)) for _ in range(x)]
    aug = interleave(ws)
    assert aug.shape == (rows, cols * x)
    for i, w in enumerate(ws):
        for j in range(cols):
            assert np.array_equal(aug[:, j * x + i], w[:, j])
    assert all(np.array_equal(a, b) for a, b in zip(deinterleave(aug, x), ws))


def test_interleave_rejects_mixed_shapes():
    with pytest.raises(ValueError):
        interleave([np.zeros((2, 2)), np.zeros((2, 3))])


def test_vit_l_m8_counts():
    plan = build_layersets(VIT_L16, 8)
    assert len(plan.ffn_sets) == 24
    assert len(plan.mha_sets) == 12
    assert plan.baseline_set == []


def test_vit_b_m8_counts():
    plan = build_layersets(VIT_B16, 8)
    assert (len(plan.ffn_sets), len(plan.mha_sets), len(plan.baseline_set)) == (12, 4, 16)
    # blocks 8..11 of each MHA type are what stage 3 cannot pack
    assert sorted(l.name for l in plan.baseline_set) == sorted(
        f"b{b}.{k}" for b in range(8, 12) for k in ("WQ", "WK", "WV", "WO"))


def _oracle_coverage(plan):
    counts = Counter(plan.all_layers())
    return all(counts[l] == 1 for l in static_layers(plan.spec)) and sum(counts.values()) == len(
        static_layers(plan.spec))


@pytest.mark.parametrize("M", [2, 4, 8, 16])
@pytest.mark.parametrize("spec", list(MODELS.values()), ids=lambda s: s.name)
def test_every_layer_exactly_once(spec, M):
    plan = build_layersets(spec, M)
    assert _oracle_coverage(plan)
    for s in plan.glp_sets:
        assert 0 < len(s.members) <= M
        assert len({(m.rows, m.cols) for m in s.members}) == 1
        assert not any(concurrent(a, b) for a in s.members for b in s.members)


def test_slack_filled_with_whole_quadruple():
    plan = build_layersets(ViTModelSpec("one", d=64, D=256, N=1, H=2, L=40), 8)
    assert plan.stage_counts["slack_layers_filled"] == 4
    assert plan.stage_counts["slack_quadruples"] == 1
    assert plan.baseline_set == []
    # Q, K and V land in three different sets
    homes = {m.kind: i for i, s in enumerate(plan.glp_sets) for m in s.members if m.is_mha}
    assert len({homes[LayerKind.WQ], homes[LayerKind.WK], homes[LayerKind.WV]}) == 3


def test_trio_special_case_when_3m_equals_4n():
    plan = build_layersets(ViTModelSpec("six", d=64, D=256, N=6, H=2, L=40), 8)
    trio = plan.mha_sets
    assert len(trio) == 3 and plan.baseline_set == []
    kinds = [Counter(m.kind for m in s.members) for s in trio]
    assert [k[LayerKind.WO] for k in kinds] == [1, 1, 0]  # earlier sets take the extras
    assert [k[LayerKind.WQ] + k[LayerKind.WK] + k[LayerKind.WV] for k in kinds] == [2, 2, 2]


def test_leftovers_go_to_baseline_without_trio_condition():
    spec = ViTModelSpec("five", d=64, D=256, N=5, H=2, L=40)
    plan = build_layersets(spec, 8)
    assert _oracle_coverage(plan)
    assert all(l.is_mha for l in plan.baseline_set)


def test_layerwise_plan_has_only_baseline():
    plan = layerwise_plan(VIT_B16, 8)
    assert plan.glp_sets == [] and len(plan.baseline_set) == 144


def test_set_rejects_concurrent_member():
    s = GLPLayerSet([StaticLayer(0, LayerKind.WQ, None, 4, 4)], 8, 3)
    with pytest.raises(MappingError):
        s.add(StaticLayer(0, LayerKind.WK, None, 4, 4))
    s.add(StaticLayer(1, LayerKind.WK, None, 4, 4))


def test_check_catches_duplicates():
    plan = build_layersets(VIT_B16, 8)
    plan.baseline_set.append(plan.baseline_set[0])
    with pytest.raises(MappingError):
        plan.check()


def test_make_plan_kinds():
    assert make_plan(VIT_B16, 8, "glp").glp_sets
    with pytest.raises(ValueError):
        make_plan(VIT_B16, 8, "diagonal")


def test_plan_is_deterministic():
    assert build_layersets(VIT_L16, 8).to_dict() == build_layersets(VIT_L16, 8).to_dict()
