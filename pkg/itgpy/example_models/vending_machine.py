from typing import List, Union

from itgpy import simulation
from itgpy.dsl import ITGReader
from itgpy.model import SystemModel
from importlib import resources


def load_text() -> str:
    """Load the vending machine `.itg` file.

    Returns
    -------
    str
        The model text.
    """
    path = resources.files("itgpy.data.vending_machine").joinpath("vm.itg")
    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")
    return path.read_text(encoding="utf-8")


def load_model() -> SystemModel:
    """Load and parse the vending machine model.

    Returns
    -------
    SystemModel
        Five regions (payment, payment return, product selection and
        dispensing, product refill, change refill) over two actors and
        eight blocks.
    """
    return ITGReader(itg_str=load_text()).get_model()


def run_sim(
    max_steps: int = 20,
    seed: Union[int, None] = None,
) -> List[simulation.TraceStep]:
    """Simulate the vending machine.

    A customer inserts coins, asks for change or selects and receives a
    product, while a vendor refills products and change coins. The five
    behaviours are orthogonal regions that advance one handshake at a time.

    Parameters
    ----------
    max_steps : int
        Number of transitions to fire. Default is `20`.
    seed : Union[int, None]
        Seed for a uniform random run. When `None` the regions take turns
        (round robin). Default is `None`.

    Examples
    --------
    >>> from itgpy.example_models import vending_machine
    >>> trace = vending_machine.run_sim(max_steps=3)
    >>> [step.transition.channel for step in trace]
    ['acceptCoin', 'returnPaymentRequest', 'selectionRequest']
    """
    if seed is None:
        policy = simulation.Policy.round_robin()
    else:
        policy = simulation.Policy.uniform_random(seed)
    return simulation.run(load_model(), policy, max_steps)
