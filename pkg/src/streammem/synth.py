"""Seeded synthetic stream generator with planted, probeable facts.

Streams alternate between topics with disjoint vocabularies so the stub
embedder sees real drift boundaries. Each topic plants capitalized
two-word entities: some mentioned repeatedly, some exactly once, with the
mention turns recorded as probe evidence. Probes ask about an already
mentioned entity, so every generated stream satisfies no-look-ahead by
construction; identical seeds yield identical files.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .config import EngineConfig
from .types import Probe, StreamEvent, Utterance

FILLER_WORDS = """
    anchor apple arrow autumn bakery balance barrel basket beacon bench berry
    binder blanket border bottle branch breeze bridge bucket bundle butter
    cabin cable candle canvas carpet carton castle cellar chalk channel
    charcoal chimney cider cliff clover cobble compass copper coral corner
    cotton cradle crate creek crumb crystal curtain dairy dapple dawn desk
    dome donkey drift dune dusk ember engine fabric falcon feather fence
    ferry fiddle flint foam fog forge fountain fox garden gate ginger glacier
    goblet grain granite grove hammer hamper harbor hatch hazel heather hedge
    hollow honey hood hoof horizon hush icicle ink iris ivory jar jelly
    junction juniper kettle kiln knot ladder lagoon lantern latch ledge lemon
    lilac linen loaf lodge loft lumber mantle maple marble marsh meadow mill
    mineral mitten moss mould mountain mud mug needle nest north notch nougat
    oak oar oasis ochre onion orchard otter oven owl paddle pantry parcel
    pasture peach pebble pepper pier pine pitcher plank plaza plum pond
    porch prairie pulley quarry quill quilt raft rain rake raven reef ribbon
    ridge river roost rope rust saddle sail salt sand satchel shale shed
    shell shelter shingle shore silo slate sleet smoke snow socket spade
    spark spice spruce stable stairs steam stone stool storm stove straw
    stream summit sunset swamp syrup tallow tassel thicket thorn tide timber
    toffee torch trail tram trench trout tundra turnip twig valley vault
    velvet vine wagon walnut wharf wheat whistle willow windmill wool yarn
""".split()

NAME_PARTS = """
    Alder Amber Arbor Ashen Aspen Aurora Bax Beacon Birch Blackwood Bram
    Briar Bronze Cedar Cinder Clay Cliffe Cobalt Coral Cove Crestwood Crimson
    Dale Dapple Dorn Dray Dune Eastmere Ebon Elm Ember Fairweather Fenwick
    Fern Flint Frost Gale Garnet Glenn Gold Granite Gray Grove Hale Harrow
    Hawk Hazel Heath Helm Hollow Holt Ingram Iron Isla Jasper Juniper Kestrel
    Lake Larch Laurel Linden Lowell Lyric Maple Marsh Mercer Mistral Moor
    Moss Nettle North Norwood Oakes Onyx Orchard Osprey Pearl Pine Quill
    Raven Reed Ridge Rowan Rust Sable Sage Shale Silver Slate Sterling Stone
    Summer Tamsin Thorn Tidewell Umber Vale Vesper Walden West Wilder Willow
    Winter Wren Yarrow
""".split()

SPEAKERS = ["ada", "bruno", "cleo", "dmitri", "edith", "felix"]


@dataclass(frozen=True)
class PlantedEntity:
    name: str
    topic: int
    target_mentions: int


@dataclass
class SyntheticStream:
    """Generated events plus the ground truth needed by tests and configs."""

    events: list[StreamEvent]
    keyword_table: dict[str, str]
    entities: list[PlantedEntity]
    mention_turns: dict[str, list[int]] = field(default_factory=dict)

    @property
    def multi_mention(self) -> list[str]:
        """Entities actually mentioned three or more times."""
        return [e.name for e in self.entities if len(self.mention_turns[e.name]) >= 3]

    @property
    def single_mention(self) -> list[str]:
        """Entities actually mentioned exactly once."""
        return [e.name for e in self.entities if len(self.mention_turns[e.name]) == 1]

    def engine_config(self, **overrides) -> EngineConfig:
        """Default config wired with this stream's scene keyword table."""
        doc = EngineConfig().to_dict()
        doc["plugins"]["scene_keywords"] = dict(self.keyword_table)
        for key, value in overrides.items():
            if key in doc["params"]:
                doc["params"][key] = value
            else:
                doc[key] = value
        return EngineConfig.from_dict(doc)


def _draw(pool: list[str], rng: random.Random, used: set[str]) -> str:
    while True:
        if pool:
            word = pool.pop()
        else:  # pool exhausted: derive fresh deterministic variants
            word = f"{rng.choice(FILLER_WORDS)}{rng.randrange(10, 99)}"
        if word not in used:
            used.add(word)
            return word


def gen_synthetic(
    seed: int,
    n_turns: int,
    n_topics: int = 4,
    probe_rate: float = 0.1,
    *,
    multi_per_topic: int = 2,
    single_per_topic: int = 2,
    replant_rate: float = 0.0,
) -> SyntheticStream:
    """Generate a topic-segmented stream with planted entities and probes.

    First mentions always land on segment-opening utterances; multi-mention
    entities are re-mentioned on later segment openings and, with
    ``replant_rate``, on mid-segment utterances too.
    """
    if n_turns < 1:
        raise ValueError("n_turns must be >= 1")
    if n_topics < 1:
        raise ValueError("n_topics must be >= 1")
    rng = random.Random(seed)
    fillers = FILLER_WORDS.copy()
    names = NAME_PARTS.copy()
    rng.shuffle(fillers)
    rng.shuffle(names)
    used_fillers: set[str] = set()
    used_names: set[str] = set()

    anchors: list[list[str]] = []
    vocabs: list[list[str]] = []
    casts: list[list[str]] = []
    keyword_table: dict[str, str] = {}
    entities: list[PlantedEntity] = []
    for topic in range(n_topics):
        topic_anchors = [_draw(fillers, rng, used_fillers) for _ in range(3)]
        anchors.append(topic_anchors)
        vocabs.append([_draw(fillers, rng, used_fillers) for _ in range(6)])
        casts.append(rng.sample(SPEAKERS, 2))
        keyword_table[topic_anchors[0]] = f"{topic_anchors[0].capitalize()} Sessions"
        targets = [rng.randint(3, 5) for _ in range(multi_per_topic)]
        targets += [1] * single_per_topic
        for target in targets:
            name = f"{_draw(names, rng, used_names)} {_draw(names, rng, used_names)}"
            entities.append(PlantedEntity(name, topic, target))

    remaining = {e.name: e.target_mentions for e in entities}
    mention_turns: dict[str, list[int]] = {e.name: [] for e in entities}
    by_topic: dict[int, list[PlantedEntity]] = {}
    for entity in entities:
        by_topic.setdefault(entity.topic, []).append(entity)

    events: list[StreamEvent] = []
    turn = 0
    topic = rng.randrange(n_topics)
    while turn < n_turns:
        if n_topics > 1:
            topic = rng.choice([t for t in range(n_topics) if t != topic])
        segment = rng.randint(4, 9)
        segment_start = True
        for _ in range(segment):
            if turn >= n_turns:
                break
            turn += 1
            mentioned = [name for name, turns in mention_turns.items() if turns]
            if not segment_start and mentioned and rng.random() < probe_rate:
                entity = rng.choice(sorted(mentioned))
                events.append(
                    Probe(
                        turn=turn,
                        question=f"recall about {entity}",
                        gold_answer=entity,
                        evidence_turns=tuple(mention_turns[entity]),
                        keywords=(entity,),
                    )
                )
                continue
            a1, a2, a3 = anchors[topic]
            words = rng.sample(vocabs[topic], 2)
            # First mentions go on segment-opening utterances: the topic
            # switch makes that utterance block-initial, so the fact lands
            # inside the event summary the retriever ranks on.
            plant = None
            pool = [e for e in by_topic[topic] if remaining[e.name] > 0]
            if segment_start and pool and rng.random() < 0.8:
                fresh = [e for e in pool if not mention_turns[e.name]]
                plant = rng.choice(sorted(fresh or pool, key=lambda e: e.name))
            elif not segment_start and rng.random() < replant_rate:
                seen = [e for e in pool if mention_turns[e.name]]
                if seen:
                    plant = rng.choice(sorted(seen, key=lambda e: e.name))
            if plant is not None:
                remaining[plant.name] -= 1
                mention_turns[plant.name].append(turn)
                text = f"{a1} {words[0]} {a2} {plant.name}"
            else:
                text = f"{a1} {words[0]} {a2} {words[1]} {a3}"
            events.append(
                Utterance(turn=turn, speaker=rng.choice(casts[topic]), text=text)
            )
            segment_start = False
    return SyntheticStream(
        events=events,
        keyword_table=keyword_table,
        entities=entities,
        mention_turns=mention_turns,
    )
