import pytest

from xchainsim import Address, World


@pytest.fixture
def two_chain_world():
    """Two chains with a token each, bridged both ways, no traffic yet."""
    world = World(seed=1)
    world.add_chain("left")
    world.add_chain("right")
    world.add_contract("left", "token", "token", owner="alice",
                       init={"bal:alice": 50, "bal:bob": 10, "bal:eve": 0})
    world.add_contract("right", "token", "token", owner="bob",
                       init={"bal:alice": 5, "bal:bob": 40, "bal:eve": 0})
    world.add_bridge("left", "right", max_delay=2, reorder=False)
    world.add_bridge("right", "left", max_delay=2, reorder=False)
    return world


def addr(chain, local):
    return Address(chain, local)
