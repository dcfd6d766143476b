import pytest

from metamultigraph import generate_hin, multi_chain_spec, single_chain_spec

from helpers import rec_dataset, splits_for, toy_hin


@pytest.fixture(scope="session")
def small_single():
    """Scaled-down planted single-chain dataset with noise and distractors."""
    return generate_hin(single_chain_spec(scale=0.05, noise=0.05, seed=0))


@pytest.fixture(scope="session")
def small_single_clean():
    return generate_hin(single_chain_spec(scale=0.05, noise=0.0, distractors=0, seed=0))


@pytest.fixture(scope="session")
def small_multi():
    return generate_hin(multi_chain_spec(scale=0.05, noise=0.05, seed=0))


@pytest.fixture(scope="session")
def single_planted():
    """Full-scale planted single-chain dataset used by the slow protocols."""
    return generate_hin(single_chain_spec(noise=0.05, seed=0))


@pytest.fixture(scope="session")
def multi_planted():
    return generate_hin(multi_chain_spec(noise=0.05, seed=0))


@pytest.fixture(scope="session")
def rec_data():
    return rec_dataset(seed=0)


@pytest.fixture
def toy_graph():
    return toy_hin(7)


@pytest.fixture
def toy_splits(toy_graph):
    return splits_for(toy_graph)
