import numpy as np
import pytest

from streammem.config import EngineConfig, UtilityParams
from streammem.hierarchy import Hierarchy, Level
from streammem.plugins import (
    PassthroughTranscriber,
    Plugins,
    StubEmbedder,
    StubGenerator,
    StubTripletExtractor,
)


@pytest.fixture
def params() -> UtilityParams:
    return UtilityParams()


@pytest.fixture
def config() -> EngineConfig:
    return EngineConfig()


@pytest.fixture
def embedder() -> StubEmbedder:
    return StubEmbedder(384)


@pytest.fixture
def stub_plugins() -> Plugins:
    return Plugins(
        embedder=StubEmbedder(384),
        generator=StubGenerator({"physics": "Learning Session"}),
        extractor=StubTripletExtractor(),
        transcriber=PassthroughTranscriber(),
    )


def unit_vector(dim: int, axis: int) -> np.ndarray:
    vec = np.zeros(dim)
    vec[axis] = 1.0
    return vec


@pytest.fixture
def tiny_hierarchy() -> Hierarchy:
    """One scene and one event (cost 1 each), ready for AMU children."""
    h = Hierarchy(budget=1000, dim=8)
    scene = h.insert(Level.SCENE, "s", unit_vector(8, 0), 1)
    h.insert(Level.EVENT, "e", unit_vector(8, 1), 1, parent=scene)
    return h
