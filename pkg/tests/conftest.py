import numpy as np
import pytest

from archsearch.space import IntRange, SearchSpaceDef, default_space, validate_space


@pytest.fixture
def full_space():
    """The standard single-modality space over all three layer types."""
    return default_space()


@pytest.fixture
def lstm_space():
    return default_space(layer_types=("LSTM",))


@pytest.fixture
def fusion_space():
    """Two modalities with all three fusion wirings."""
    return default_space(fusion_modes=("early", "intermediate", "late"),
                         num_modalities=2)


def small_benchmark_space() -> SearchSpaceDef:
    """A compact space used by the seeded search-behavior checks: small enough
    that local search can traverse it within a couple hundred trials, large
    enough that 50 random draws do not saturate it."""
    space = SearchSpaceDef(
        seq_layer_types=("LSTM", "TCN"),
        seq_num_layers=IntRange(1, 4),
        seq_num_units=IntRange(8, 13),
        head_num_layers=IntRange(1, 3),
        head_num_units=IntRange(8, 13),
    )
    validate_space(space)
    return space


@pytest.fixture
def small_space():
    return small_benchmark_space()


@pytest.fixture
def rng():
    return np.random.default_rng(42)
