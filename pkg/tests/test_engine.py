import json

import pytest

from streammem.config import EngineConfig
from streammem.engine import Engine
from streammem.errors import EngineBusyError, PluginError, PreconditionError
from streammem.hierarchy import Level
from streammem.plugins import Plugins, StubEmbedder, StubTripletExtractor, StubGenerator, PassthroughTranscriber
from streammem.synth import gen_synthetic
from streammem.types import Probe, Utterance


def tiny_config(**overrides) -> EngineConfig:
    doc = EngineConfig().to_dict()
    doc["params"]["t_max"] = overrides.pop("t_max", 200)
    for key, value in overrides.items():
        doc[key] = value
    return EngineConfig.from_dict(doc)


def feed_texts(engine: Engine, texts: list[str], start: int = 1, speaker: str = "amy"):
    for i, text in enumerate(texts):
        engine.on_event(Utterance(start + i, speaker, text))


class TestOnEvent:
    def test_same_topic_then_probe(self):
        engine = Engine(tiny_config())
        feed_texts(engine, [f"lakeside cabin notes {i} near Crystal Lake" for i in range(6)])
        result = engine.on_event(Probe(10, "recall about Crystal Lake"))
        assert result is not None
        assert result.answer != "unknown"
        assert "Crystal Lake" in result.context_text
        assert engine.hierarchy.total_cost > 0

    def test_probe_on_empty_state(self):
        engine = Engine(tiny_config())
        result = engine.on_event(Probe(1, "anything at all"))
        assert result.answer == "unknown"
        assert result.context_text.strip() == ""
        assert result.paths == ()

    def test_out_of_order_turn_rejected_state_untouched(self):
        engine = Engine(tiny_config())
        engine.on_event(Utterance(5, "amy", "hello there friend"))
        snapshot = engine.snapshot()
        with pytest.raises(PreconditionError):
            engine.on_event(Utterance(5, "amy", "too late"))
        with pytest.raises(PreconditionError):
            engine.on_event(Probe(3, "question"))
        assert engine.snapshot() == snapshot
        assert engine.clock == 5

    def test_budget_holds_after_every_event(self):
        engine = Engine(tiny_config(t_max=40))
        stream = gen_synthetic(seed=5, n_turns=120, n_topics=3, probe_rate=0.1)
        for event in stream.events:
            engine.on_event(event)
            assert engine.hierarchy.total_cost <= 40

    def test_reentrant_call_rejected(self):
        engine = Engine(tiny_config())

        class ReentrantEmbedder(StubEmbedder):
            def __init__(self, eng):
                super().__init__(384)
                self.engine = eng

            def embed(self, text):
                if self.engine.clock == 2:  # re-enter once mid-stream
                    self.engine.on_event(Utterance(99, "x", "sneaky"))
                return super().embed(text)

        engine.plugins.embedder = ReentrantEmbedder(engine)
        engine.on_event(Utterance(1, "a", "first words"))
        engine.on_event(Utterance(2, "a", "second words"))
        with pytest.raises(EngineBusyError):
            engine.on_event(Utterance(3, "a", "third words"))

    def test_flush_on_probe_mode(self):
        config = tiny_config(flush_on_probe=True)
        engine = Engine(config)
        feed_texts(engine, ["visited Crystal Lake today"])
        result = engine.on_event(Probe(5, "recall about Crystal Lake"))
        assert engine.buffer.entries == []  # flushed before answering
        amu_labels = [
            engine.hierarchy.nodes[i].label
            for i in engine.hierarchy.ids_at(Level.AMU)
        ]
        assert "Crystal Lake" in amu_labels
        assert "Crystal Lake" in result.context_text

    def test_probes_do_not_flush_by_default(self):
        engine = Engine(tiny_config())
        feed_texts(engine, ["visited Crystal Lake today"])
        engine.on_event(Probe(5, "recall about Crystal Lake"))
        assert len(engine.buffer.entries) == 1  # still buffered, visible via short-term


class FlakyGenerator(StubGenerator):
    """Fails a fixed number of generate calls, then recovers."""

    def __init__(self, failures: int):
        super().__init__()
        self.failures = failures

    def generate(self, prompt):
        if self.failures > 0:
            self.failures -= 1
            raise PluginError("synthetic outage")
        return super().generate(prompt)


class TestDistillFailureHandling:
    def _engine(self, failures: int) -> Engine:
        config = tiny_config(buffer_capacity=2)
        plugins = Plugins(
            embedder=StubEmbedder(384),
            generator=FlakyGenerator(failures),
            extractor=StubTripletExtractor(),
            transcriber=PassthroughTranscriber(),
        )
        return Engine(config, plugins=plugins)

    def test_failed_block_requeued_once_then_recovered(self):
        engine = self._engine(failures=1)
        feed_texts(engine, ["alpha one", "alpha two"])  # flush fails once
        assert len(engine.failed_blocks) == 1
        assert engine.hierarchy.total_cost == 0
        feed_texts(engine, ["beta one", "beta two"], start=3)  # retry succeeds
        assert engine.failed_blocks == []
        assert engine.stats.dropped_blocks == 0
        assert engine.hierarchy.total_cost > 0

    def test_block_dropped_after_second_failure_with_audit(self):
        engine = self._engine(failures=4)
        records = []
        engine.audit_sink = records.append
        feed_texts(engine, ["alpha one", "alpha two"])
        feed_texts(engine, ["beta one", "beta two"], start=3)
        assert engine.stats.dropped_blocks == 1
        dropped = [r for r in records if "dropped_block" in r]
        assert dropped and dropped[0]["dropped_block"] == [1, 2]


class TestSnapshot:
    def test_roundtrip_bytes_identical(self):
        engine = Engine(tiny_config())
        stream = gen_synthetic(seed=3, n_turns=80, n_topics=3, probe_rate=0.1)
        for event in stream.events:
            engine.on_event(event)
        first = engine.snapshot()
        second = Engine.load(first).snapshot()
        assert first == second

    def test_empty_engine_snapshot_is_schema_valid(self):
        doc = json.loads(Engine(tiny_config()).snapshot())
        assert doc["schema_version"] == 1
        assert doc["hierarchy"]["nodes"] == []
        assert doc["clock"] == 0
        restored = Engine.load(json.dumps(doc, sort_keys=True, separators=(",", ":")))
        assert restored.hierarchy.total_cost == 0

    def test_restart_determinism(self):
        """Snapshot mid-stream, restore, continue: outputs match the straight run."""
        stream = gen_synthetic(seed=11, n_turns=300, n_topics=4, probe_rate=0.12)
        config = stream.engine_config(t_max=300)
        split = len(stream.events) // 2

        straight = Engine(config)
        straight_answers = []
        for event in stream.events:
            result = straight.on_event(event)
            if result is not None:
                straight_answers.append(result.answer)

        resumed = Engine(config)
        resumed_answers = []
        for event in stream.events[:split]:
            result = resumed.on_event(event)
            if result is not None:
                resumed_answers.append(result.answer)
        resumed = Engine.load(resumed.snapshot())
        for event in stream.events[split:]:
            result = resumed.on_event(event)
            if result is not None:
                resumed_answers.append(result.answer)

        assert resumed_answers == straight_answers
        assert resumed.snapshot() == straight.snapshot()

    def test_unsupported_schema_version(self):
        engine = Engine(tiny_config())
        doc = json.loads(engine.snapshot())
        doc["schema_version"] = 999
        with pytest.raises(PreconditionError):
            Engine.load(json.dumps(doc))


class TestWorkBound:
    def test_examined_nodes_bounded_by_budget_function(self):
        """Per-event work tracks T_max, not the stream position."""
        t_max = 50
        config = tiny_config(t_max=t_max)
        stream = gen_synthetic(seed=9, n_turns=1200, n_topics=3, probe_rate=0.08)
        engine = Engine(config)
        per_event: list[int] = []
        for event in stream.events:
            engine.on_event(event)
            per_event.append(engine.hierarchy.examined)
        n_max = t_max  # minimal node cost is one token
        bound = 40 * (n_max * n_max + n_max + 64)
        assert max(per_event) <= bound
        # steady state: late work does not exceed early steady work
        early = max(per_event[200:700])
        late = max(per_event[700:])
        assert late <= early * 1.5
