import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from streammem.errors import NotFoundError, PreconditionError, StructuralError
from streammem.hierarchy import Hierarchy, Level

DIM = 8


def vec(axis: int = 0) -> np.ndarray:
    v = np.zeros(DIM)
    v[axis % DIM] = 1.0
    return v


class TestInsert:
    def test_first_scene(self):
        h = Hierarchy(budget=100, dim=DIM)
        sid = h.insert(Level.SCENE, "road trip", vec(), 3)
        assert h.roots == {sid}
        assert h.total_cost == 3

    def test_amu_under_scene_is_structural_error(self):
        h = Hierarchy(budget=100, dim=DIM)
        sid = h.insert(Level.SCENE, "s", vec(), 3)
        with pytest.raises(StructuralError):
            h.insert(Level.AMU, "a", vec(), 1, parent=sid)

    def test_cost_is_additive(self):
        h = Hierarchy(budget=100, dim=DIM)
        sid = h.insert(Level.SCENE, "s", vec(), 3)
        h.insert(Level.EVENT, "e", vec(1), 2, parent=sid)
        assert h.total_cost == 5

    def test_event_without_parent_rejected(self):
        h = Hierarchy(budget=100, dim=DIM)
        with pytest.raises(StructuralError):
            h.insert(Level.EVENT, "e", vec(), 1)

    def test_unknown_parent(self):
        h = Hierarchy(budget=100, dim=DIM)
        with pytest.raises(NotFoundError):
            h.insert(Level.EVENT, "e", vec(), 1, parent=99)

    def test_zero_cost_rejected(self):
        h = Hierarchy(budget=100, dim=DIM)
        with pytest.raises(StructuralError):
            h.insert(Level.SCENE, "s", vec(), 0)

    def test_relations_only_on_amus(self):
        h = Hierarchy(budget=100, dim=DIM)
        with pytest.raises(StructuralError):
            h.insert(Level.SCENE, "s", vec(), 1, relations=[("mentions", 1)])


class TestTouch:
    def test_counter_semantics(self):
        h = Hierarchy(budget=100, dim=DIM)
        sid = h.insert(Level.SCENE, "s", vec(), 1)
        h.touch(sid, 7)
        node = h.node(sid)
        assert node.freq == 1
        assert node.last_touch == 7

    def test_same_turn_twice(self):
        h = Hierarchy(budget=100, dim=DIM)
        sid = h.insert(Level.SCENE, "s", vec(), 1)
        h.touch(sid, 7)
        h.touch(sid, 7)
        assert h.node(sid).freq == 2
        assert h.node(sid).last_touch == 7

    def test_time_must_not_go_backwards(self):
        h = Hierarchy(budget=100, dim=DIM)
        sid = h.insert(Level.SCENE, "s", vec(), 1)
        h.touch(sid, 7)
        with pytest.raises(PreconditionError):
            h.touch(sid, 6)

    def test_unknown_id(self):
        h = Hierarchy(budget=100, dim=DIM)
        with pytest.raises(NotFoundError):
            h.touch(42, 1)


def three_level(h: Hierarchy, n_events: int = 2, n_amus: int = 3):
    sid = h.insert(Level.SCENE, "s", vec(), 2)
    amu_ids = []
    eids = []
    k = 0
    for i in range(n_events):
        eid = h.insert(Level.EVENT, f"e{i}", vec(i + 1), 2, parent=sid)
        eids.append(eid)
        for _ in range(n_amus if i == 0 else 0):
            amu_ids.append(h.insert(Level.AMU, f"a{k}", vec(k + 3), 1, parent=eid))
            k += 1
    return sid, eids, amu_ids


class TestRemoveSubtree:
    def test_remove_leaf_keeps_siblings(self):
        h = Hierarchy(budget=100, dim=DIM)
        _, eids, amu_ids = three_level(h)
        before = h.total_cost
        removed = h.remove_subtree(amu_ids[0])
        assert removed == [amu_ids[0]]
        assert h.total_cost == before - 1
        assert set(amu_ids[1:]) <= h.nodes[eids[0]].children

    def test_remove_scene_counts_subtree(self):
        h = Hierarchy(budget=100, dim=DIM)
        sid, eids, amu_ids = three_level(h, n_events=2, n_amus=3)
        removed = h.remove_subtree(sid)
        assert len(removed) == 6  # scene + 2 events + 3 amus
        assert not h.nodes

    def test_removing_last_amu_does_not_cascade(self):
        h = Hierarchy(budget=100, dim=DIM)
        _, eids, amu_ids = three_level(h, n_events=1, n_amus=1)
        h.remove_subtree(amu_ids[0])
        assert eids[0] in h.nodes  # cascade is the optimizer's job

    def test_ids_never_reused(self):
        h = Hierarchy(budget=100, dim=DIM)
        sid = h.insert(Level.SCENE, "s", vec(), 1)
        h.remove_subtree(sid)
        sid2 = h.insert(Level.SCENE, "s2", vec(), 1)
        assert sid2 > sid


@st.composite
def op_sequences(draw):
    return draw(
        st.lists(
            st.tuples(
                st.sampled_from(["scene", "event", "amu", "remove"]),
                st.integers(min_value=1, max_value=5),
                st.integers(min_value=0, max_value=10_000),
            ),
            max_size=40,
        )
    )


class TestAccountingProperty:
    @settings(max_examples=60, deadline=None)
    @given(op_sequences())
    def test_cached_cost_matches_recompute(self, ops):
        h = Hierarchy(budget=10_000, dim=DIM)
        for kind, cost, pick in ops:
            if kind == "scene":
                h.insert(Level.SCENE, "s", vec(pick), cost)
            elif kind == "event":
                scenes = h.ids_at(Level.SCENE)
                if scenes:
                    h.insert(Level.EVENT, "e", vec(pick), cost,
                             parent=scenes[pick % len(scenes)])
            elif kind == "amu":
                events = h.ids_at(Level.EVENT)
                if events:
                    h.insert(Level.AMU, "a", vec(pick), cost,
                             parent=events[pick % len(events)])
            elif kind == "remove" and h.nodes:
                ids = sorted(h.nodes)
                h.remove_subtree(ids[pick % len(ids)])
            assert h.total_cost == h.recomputed_cost()
            h.validate()
