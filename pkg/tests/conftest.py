import pytest

from itgpy import model
from itgpy.example_models import two_loop, vending_machine


@pytest.fixture
def vm_text():
    return vending_machine.load_text()


@pytest.fixture
def vm_model():
    return vending_machine.load_model()


@pytest.fixture
def itg01_model():
    return two_loop.load_model()


@pytest.fixture
def ping_model():
    """Actor A pings block B once: region R, a -> b."""
    return model.SystemModel(
        name="Ping",
        agents=(
            model.Agent("actor", "A"),
            model.Agent("block", "B", ":B Block"),
        ),
        channels=(model.ChannelSignature("ping"),),
        regions=(
            model.Region(
                id="R",
                states=frozenset({"a", "b"}),
                initial="a",
                transitions=(
                    model.Transition(
                        "a", model.Interaction("A", "ping", "B"), "b"
                    ),
                ),
            ),
        ),
    )


@pytest.fixture
def self_loop_model():
    """Three regions, each a single self-loop."""
    regions = tuple(
        model.Region(
            id=f"R{i}",
            states=frozenset({f"s{i}"}),
            initial=f"s{i}",
            transitions=(
                model.Transition(
                    f"s{i}", model.Interaction("A", f"c{i}", "B"), f"s{i}"
                ),
            ),
        )
        for i in range(1, 4)
    )
    return model.SystemModel(
        name="Loops",
        agents=(model.Agent("actor", "A"), model.Agent("block", "B")),
        channels=tuple(model.ChannelSignature(f"c{i}") for i in range(1, 4)),
        regions=regions,
    )
