from itgpy.dsl import ITGReader
from itgpy.model import SystemModel
from importlib import resources


def load_text() -> str:
    """Load the two-loop example `.itg` file."""
    path = resources.files("itgpy.data.two_loop").joinpath("itg01.itg")
    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")
    return path.read_text(encoding="utf-8")


def load_model() -> SystemModel:
    """Load the two-loop example.

    One region with initial state `s1` and two branches: `s1 -> s2 -> s1`
    (a type 1 then a type 2 interaction) and `s1 -> s3 -> s4`, which ends
    in a deadlock at `s4`.
    """
    return ITGReader(itg_str=load_text()).get_model()
