import math

import numpy as np
import pytest

from streammem.config import UtilityParams
from streammem.distillation import AmuCandidate, PendingNodes
from streammem.errors import PreconditionError
from streammem.hierarchy import Hierarchy, Level
from streammem.optimizer import utility
from streammem.perception import BufferEntry
from streammem.plugins import EchoGenerator, StubGenerator
from streammem.retrieval import (
    ContextBundle,
    answer,
    assemble_context,
    render_prompt,
    score,
    search,
)
from streammem.types import Probe, Utterance

DIM = 8


def unit(axis: int) -> np.ndarray:
    v = np.zeros(DIM)
    v[axis % DIM] = 1.0
    return v


class QueryEmbedder:
    """Returns one fixed vector for any query text."""

    def __init__(self, vector: np.ndarray):
        self.vector = vector
        self.dimension = len(vector)
        self.io_seconds = 0.0

    def embed(self, text: str) -> np.ndarray:
        return self.vector


def blend(axis: int, weight: float) -> np.ndarray:
    """Unit vector with ``weight`` projection onto the query axis 0."""
    v = np.zeros(DIM)
    v[0] = weight
    v[axis] = math.sqrt(1 - weight * weight)
    return v


class TestScore:
    def test_perfect_cosine_returns_utility(self, params):
        h = Hierarchy(budget=100, dim=DIM)
        s = h.insert(Level.SCENE, "s", unit(0), 1)
        e = h.insert(Level.EVENT, "e", unit(1), 1, parent=s)
        a = h.insert(Level.AMU, "a", unit(0), 1, parent=e, last_touch=3)
        assert score(unit(0), h.nodes[a], 3, params) == pytest.approx(0.4)

    def test_zero_cosine_kills_score(self, params):
        h = Hierarchy(budget=100, dim=DIM)
        s = h.insert(Level.SCENE, "s", unit(0), 1)
        e = h.insert(Level.EVENT, "e", unit(1), 1, parent=s)
        a = h.insert(Level.AMU, "a", unit(2), 1, parent=e, freq=50, last_touch=3)
        assert score(unit(3), h.nodes[a], 3, params) == 0.0

    def test_product_of_frozen_reference(self, params):
        # cos 0.8 times the frozen utility value for (f=1, dt=tau)
        h = Hierarchy(budget=100, dim=DIM)
        s = h.insert(Level.SCENE, "s", unit(0), 1)
        e = h.insert(Level.EVENT, "e", unit(1), 1, parent=s)
        a = h.insert(Level.AMU, "a", blend(2, 0.8), 1, parent=e, freq=1, last_touch=0)
        value = score(unit(0), h.nodes[a], int(params.tau), params)
        assert value == pytest.approx(0.8 * 0.5630400848045441, abs=1e-12)


def build_forest(params: UtilityParams) -> tuple[Hierarchy, dict]:
    """Two scenes, three events, five AMUs with controlled query cosines."""
    h = Hierarchy(budget=10_000, dim=DIM)
    ids = {}
    ids["s_close"] = h.insert(Level.SCENE, "close scene", blend(1, 0.9), 2)
    ids["s_far"] = h.insert(Level.SCENE, "far scene", blend(1, 0.2), 2)
    ids["e_hot"] = h.insert(Level.EVENT, "hot event", blend(2, 0.8), 2, parent=ids["s_close"])
    ids["e_cool"] = h.insert(Level.EVENT, "cool event", blend(2, 0.4), 2, parent=ids["s_close"])
    ids["e_far"] = h.insert(Level.EVENT, "far event", blend(2, 0.3), 2, parent=ids["s_far"])
    # AMUs: (key, parent, cosine-to-query, freq)
    layout = [
        ("a_best", "e_hot", 0.9, 5),
        ("a_second", "e_hot", 0.9, 0),
        ("a_third", "e_cool", 0.7, 2),
        ("a_low_sim", "e_cool", 0.4, 9),  # below min_sim, high utility
        ("a_far", "e_far", 0.8, 1),
    ]
    for key, parent, cos, freq in layout:
        ids[key] = h.insert(
            Level.AMU, key, blend(3, cos), 1, parent=ids[parent], freq=freq, last_touch=0
        )
    return h, ids


class TestSearch:
    def test_empty_hierarchy_returns_empty(self, params):
        h = Hierarchy(budget=100, dim=DIM)
        assert search(h, "q", QueryEmbedder(unit(0)), 1, params) == []

    def test_min_sim_excludes_high_utility_low_cosine(self, params):
        h, ids = build_forest(params)
        paths = search(h, "q", QueryEmbedder(unit(0)), 0, params, k_amu=5)
        labels = [p.amu_label for p in paths]
        assert "a_low_sim" not in labels
        assert all(p.score > 0 for p in paths)

    def test_order_matches_hand_computed_scores(self, params):
        h, ids = build_forest(params)

        # independent recomputation before search mutates access counters:
        # cosine times (alpha*ln(f+1) + beta) since every last_touch is `now`
        def s(key, cos):
            node = h.nodes[ids[key]]
            return cos * (params.alpha * math.log(node.freq + 1) + params.beta)

        expected = {
            "a_best": s("a_best", 0.9),     # 0.9 * (0.6 ln6 + 0.4)  ~ 1.327
            "a_third": s("a_third", 0.7),   # 0.7 * (0.6 ln3 + 0.4)  ~ 0.741
            "a_far": s("a_far", 0.8),       # 0.8 * (0.6 ln2 + 0.4)  ~ 0.653
        }
        paths = search(h, "q", QueryEmbedder(unit(0)), 0, params, k_amu=3)
        assert [p.amu_id for p in paths] == [ids["a_best"], ids["a_third"], ids["a_far"]]
        for path, key in zip(paths, ("a_best", "a_third", "a_far")):
            assert path.score == pytest.approx(expected[key])
        assert [p.score for p in paths] == sorted((p.score for p in paths), reverse=True)

    def test_same_cosine_higher_utility_first(self, params):
        h, ids = build_forest(params)
        paths = search(h, "q", QueryEmbedder(unit(0)), 0, params, k_amu=5)
        labels = [p.amu_label for p in paths]
        assert labels.index("a_best") < labels.index("a_second")

    def test_k_bounds_hold(self, params):
        h, ids = build_forest(params)
        paths = search(h, "q", QueryEmbedder(unit(0)), 0, params,
                       k_scene=1, k_event=1, k_amu=2)
        assert len(paths) <= 2
        assert len({p.scene_id for p in paths}) <= 1
        # only the close scene's hot event can contribute
        assert {p.event_id for p in paths} <= {ids["e_hot"]}

    def test_returned_nodes_touched(self, params):
        h, ids = build_forest(params)
        before = {nid: (n.freq, n.last_touch) for nid, n in h.nodes.items()}
        paths = search(h, "q", QueryEmbedder(unit(0)), 7, params, k_amu=1)
        path = paths[0]
        for nid in (path.scene_id, path.event_id, path.amu_id):
            assert h.nodes[nid].freq == before[nid][0] + 1
            assert h.nodes[nid].last_touch == 7

    def test_readonly_search_mutates_nothing(self, params):
        h, ids = build_forest(params)
        before = {nid: (n.freq, n.last_touch) for nid, n in h.nodes.items()}
        search(h, "q", QueryEmbedder(unit(0)), 7, params, touch=False)
        assert {nid: (n.freq, n.last_touch) for nid, n in h.nodes.items()} == before

    def test_retrieval_feedback_raises_future_utility(self, params):
        h, ids = build_forest(params)
        counterfactual = {nid: (n.freq, n.last_touch) for nid, n in h.nodes.items()}
        paths = search(h, "q", QueryEmbedder(unit(0)), 7, params, k_amu=1)
        returned = h.nodes[paths[0].amu_id]
        freq0, touch0 = counterfactual[returned.id]
        u_with = utility(returned, 8, params)
        untouched = type(returned)(
            id=returned.id, level=returned.level, label=returned.label,
            embedding=returned.embedding, cost=returned.cost,
            freq=freq0, last_touch=touch0,
        )
        assert u_with > utility(untouched, 8, params)

    def test_k_must_be_positive(self, params):
        h, _ = build_forest(params)
        with pytest.raises(PreconditionError):
            search(h, "q", QueryEmbedder(unit(0)), 0, params, k_amu=0)


GOLDEN_PROMPT = (
    "Please carefully think about the following question and provide a direct, "
    "concise answer with key points only.\n"
    'Do NOT start your answer with phrases like "Based on..." or "According to...". '
    "Instead, directly state the answer.\n"
    "## Short-term Memory: penny: my tire blew out | leonard: are you ok\n"
    "## Pending Memory Buffer: Garage Talk > penny: my tire blew out: Tire, Highway\n"
    "## Long-term Memory: **Car Trouble > the blowout** (2 amu(s)): - tire blowout "
    "- Highway Nine **Car Trouble > the tow** (1 amu(s)): - Tow Truck\n"
    "Question: what happened to the car\n"
    "Answer (provide key points directly, no introductory phrases):"
)


def bundle_fixture() -> ContextBundle:
    entries = [
        BufferEntry(Utterance(1, "penny", "my tire blew out"), unit(0)),
        BufferEntry(Utterance(2, "leonard", "are you ok"), unit(0)),
    ]
    pending = [
        PendingNodes(
            event_label="penny: my tire blew out",
            scene_label="Garage Talk",
            amu_candidates=[
                AmuCandidate("Tire", unit(0)),
                AmuCandidate("Highway", unit(1)),
            ],
            block_span=(1, 2),
            event_embedding=unit(0),
            scene_embedding=unit(1),
        )
    ]
    from streammem.retrieval import EvidencePath

    paths = [
        EvidencePath(10, 11, 12, "Car Trouble", "the blowout", "tire blowout", (), 0.9),
        EvidencePath(10, 11, 13, "Car Trouble", "the blowout", "Highway Nine", (), 0.5),
        EvidencePath(10, 14, 15, "Car Trouble", "the tow", "Tow Truck", (), 0.4),
    ]
    return assemble_context(entries, pending, paths)


class TestAssembleAndAnswer:
    def test_all_empty_sections(self):
        bundle = assemble_context([], [], [])
        assert bundle.render_short_term() == ""
        assert bundle.render_pending() == ""
        assert bundle.render_long_term() == ""

    def test_single_path_single_header(self):
        from streammem.retrieval import EvidencePath

        bundle = assemble_context(
            [], [], [EvidencePath(1, 2, 3, "S", "E", "fact", (), 1.0)]
        )
        assert bundle.render_long_term() == "**S > E** (1 amu(s)): - fact"

    def test_rendering_is_byte_stable(self):
        a = bundle_fixture()
        b = bundle_fixture()
        assert render_prompt(a, "q") == render_prompt(b, "q")

    def test_golden_prompt_bytes(self):
        prompt = render_prompt(bundle_fixture(), "what happened to the car")
        assert prompt == GOLDEN_PROMPT

    def test_stub_answer_prefers_top_path(self):
        result = answer(
            Probe(9, "what happened to the car"), bundle_fixture(), StubGenerator()
        )
        assert result == "tire blowout"

    def test_stub_answer_falls_back_to_recent_short_term(self):
        bundle = assemble_context(
            [BufferEntry(Utterance(1, "penny", "my tire blew out"), unit(0))], [], []
        )
        result = answer(Probe(2, "anything"), bundle, StubGenerator())
        assert result == "my tire blew out"

    def test_stub_answer_unknown_on_empty_bundle(self):
        result = answer(Probe(1, "anything"), assemble_context([], [], []), StubGenerator())
        assert result == "unknown"

    def test_echo_generator_exposes_prompt_shape(self):
        result = answer(Probe(9, "what?"), bundle_fixture(), EchoGenerator())
        assert result.startswith("Please carefully think about")
        assert "## Short-term Memory: " in result
        assert "## Pending Memory Buffer: " in result
        assert "## Long-term Memory: " in result
