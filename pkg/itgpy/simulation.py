import logging
import numpy as np

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from itgpy.model import SystemModel, Transition

logger = logging.getLogger(__name__)

Label = Tuple[str, str, str]


@dataclass(frozen=True)
class Configuration:
    """The active state of every region.

    Stored as parallel tuples in region declaration order so configurations
    are hashable and can be used as search keys.
    """
    regions: Tuple[str, ...] = ()
    states: Tuple[str, ...] = ()

    def __getitem__(self, region: str) -> str:
        try:
            return self.states[self.regions.index(region)]
        except ValueError:
            raise KeyError(region)

    def __len__(self) -> int:
        return len(self.regions)

    def as_dict(self) -> Dict[str, str]:
        return dict(zip(self.regions, self.states))

    def advance(self, region: str, state: str) -> "Configuration":
        """A copy with only `region` moved to `state`."""
        index = self.regions.index(region)
        states = self.states[:index] + (state,) + self.states[index + 1:]
        return Configuration(self.regions, states)

    def __str__(self) -> str:
        return " ".join(f"{r}={s}" for r, s in zip(self.regions, self.states))


@dataclass(frozen=True)
class TraceStep:
    """One fired transition and the region it belongs to."""
    region: str
    transition: Transition

    @property
    def label(self) -> Label:
        return self.transition.interaction.label


@dataclass(frozen=True)
class Deadlock:
    """No region has an enabled transition in `configuration`."""
    configuration: Configuration


class PolicyKind(str, Enum):
    UNIFORM_RANDOM = "uniform_random"
    ROUND_ROBIN = "round_robin"


@dataclass(frozen=True)
class Policy:
    """How the simulator chooses among enabled transitions.

    Attributes
    ----------
    kind : PolicyKind
        `UNIFORM_RANDOM` draws uniformly over all candidates with a seeded
        generator; `ROUND_ROBIN` rotates over regions.
    seed : Union[int, None]
        Seed of the generator, in `[0, 2**64)`. Required for
        `UNIFORM_RANDOM`, ignored for `ROUND_ROBIN`.

    Examples
    --------
    >>> from itgpy import simulation
    >>> simulation.Policy.uniform_random(seed=42)
    Policy(kind=<PolicyKind.UNIFORM_RANDOM: 'uniform_random'>, seed=42)
    """
    kind: PolicyKind
    seed: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.kind, PolicyKind):
            raise TypeError(
                f"Expected type PolicyKind but got {type(self.kind)}."
            )
        if self.kind == PolicyKind.UNIFORM_RANDOM:
            if self.seed is None:
                raise ValueError("A uniform_random policy requires a seed.")
            if isinstance(self.seed, bool) or not isinstance(self.seed, int):
                raise TypeError(
                    f"Expected type int for seed but got {type(self.seed)}."
                )
            if not 0 <= self.seed < 2**64:
                raise ValueError(
                    "seed must be a 64-bit unsigned integer. "
                    f"Got {self.seed}."
                )

    @classmethod
    def uniform_random(cls, seed: int) -> "Policy":
        return cls(PolicyKind.UNIFORM_RANDOM, seed)

    @classmethod
    def round_robin(cls) -> "Policy":
        return cls(PolicyKind.ROUND_ROBIN)

    def scheduler(self) -> "_Scheduler":
        """A fresh scheduler carrying this policy's cursor or generator."""
        if self.kind == PolicyKind.UNIFORM_RANDOM:
            return _UniformScheduler(self.seed)
        return _RoundRobinScheduler()


class _Scheduler(ABC):
    @abstractmethod
    def choose(
        self, candidates: Sequence[TraceStep], region_ids: Sequence[str]
    ) -> TraceStep:
        """Pick one of the non-empty `candidates`."""


class _UniformScheduler(_Scheduler):
    def __init__(self, seed: int):
        self._rng = np.random.default_rng(seed)

    def choose(self, candidates, region_ids):
        return candidates[int(self._rng.integers(len(candidates)))]


class _RoundRobinScheduler(_Scheduler):
    """Cycle regions from the last fired one; fire the next region's first
    candidate."""
    def __init__(self):
        self._last = -1

    def choose(self, candidates, region_ids):
        by_region: Dict[str, TraceStep] = {}
        for candidate in candidates:
            by_region.setdefault(candidate.region, candidate)
        count = len(region_ids)
        for offset in range(1, count + 1):
            index = (self._last + offset) % count
            chosen = by_region.get(region_ids[index])
            if chosen is not None:
                self._last = index
                return chosen
        raise ValueError("No candidate belongs to a region of the model.")


def initial(model: SystemModel) -> Configuration:
    """Every region at its declared initial state."""
    return Configuration(
        tuple(r.id for r in model.regions),
        tuple(r.initial for r in model.regions),
    )


def enabled(
    model: SystemModel, config: Configuration
) -> List[TraceStep]:
    """Transitions that can fire from `config`.

    Every region contributes the transitions leaving its active state.
    Candidates are ordered by region, then by transition declaration
    order. An empty list means deadlock.
    """
    candidates = []
    for region, state in zip(model.regions, config.states):
        for transition in region.transitions:
            if transition.source == state:
                candidates.append(TraceStep(region.id, transition))
    return candidates


def step(
    model: SystemModel,
    config: Configuration,
    policy: Union[Policy, "_Scheduler"],
) -> Union[Tuple[TraceStep, Configuration], Deadlock]:
    """Fire exactly one enabled transition chosen by `policy`.

    Only the fired region's state changes. Returns `Deadlock` when nothing
    is enabled.

    Parameters
    ----------
    model : SystemModel
        A valid model.
    config : Configuration
        The configuration to step from.
    policy : Union[Policy, _Scheduler]
        A `Policy` is turned into a fresh scheduler for this one step, so a
        round-robin cursor or random stream does not carry over between
        calls. Pass `Policy.scheduler()` to keep that state across steps, as
        `ITGSim` does.
    """
    if isinstance(policy, Policy):
        scheduler = policy.scheduler()
    elif isinstance(policy, _Scheduler):
        scheduler = policy
    else:
        raise TypeError(
            f"Expected type Policy or scheduler but got {type(policy)}."
        )
    candidates = enabled(model, config)
    if not candidates:
        return Deadlock(config)
    chosen = scheduler.choose(candidates, model.region_ids)
    return chosen, config.advance(chosen.region, chosen.transition.target)


class ITGSim:
    """Run a model as a labelled transition system over its regions.

    An instance owns the current configuration and the policy's cursor or
    random generator, so it should be driven from one thread at a time.
    Separate instances over the same model are independent.

    Attributes
    ----------
    model : SystemModel
        A valid model.
    policy : Policy
        The choice policy.
    configuration : Configuration
        The current configuration.

    Examples
    --------
    >>> from itgpy import simulation
    >>> from itgpy.example_models import vending_machine
    >>> sim = simulation.ITGSim(
    ...     vending_machine.load_model(),
    ...     simulation.Policy.round_robin()
    ... )
    >>> [s.transition.channel for s in sim.run(3)]
    ['acceptCoin', 'returnPaymentRequest', 'selectionRequest']
    """
    def __init__(self, model: SystemModel, policy: Policy):
        if not isinstance(model, SystemModel):
            raise TypeError(
                f"Expected type SystemModel but got {type(model)}."
            )
        if not isinstance(policy, Policy):
            raise TypeError(f"Expected type Policy but got {type(policy)}.")
        self.model = model
        self.policy = policy
        self.reset()

    def reset(self) -> None:
        """Return to the initial configuration and restart the policy."""
        self.configuration = initial(self.model)
        self._scheduler = self.policy.scheduler()

    def enabled(self) -> List[TraceStep]:
        return enabled(self.model, self.configuration)

    def step(self) -> Union[TraceStep, Deadlock]:
        """Fire one transition and advance the configuration."""
        result = step(self.model, self.configuration, self._scheduler)
        if isinstance(result, Deadlock):
            logger.debug("deadlock at %s", self.configuration)
            return result
        fired, self.configuration = result
        logger.debug(
            "fired %s: %s -> %s on %s",
            fired.region, fired.transition.source, fired.transition.target,
            fired.transition.channel,
        )
        return fired

    def run(self, max_steps: int) -> List[TraceStep]:
        """Step until `max_steps` transitions fired or deadlock."""
        if isinstance(max_steps, bool) or not isinstance(max_steps, int):
            raise TypeError(
                f"Expected type int for max_steps but got {type(max_steps)}."
            )
        if max_steps < 0:
            raise ValueError(f"max_steps must be >= 0. Got {max_steps}.")
        trace = []
        while len(trace) < max_steps:
            fired = self.step()
            if isinstance(fired, Deadlock):
                break
            trace.append(fired)
        return trace


def run(
    model: SystemModel, policy: Policy, max_steps: int
) -> List[TraceStep]:
    """Run a fresh simulation from the initial configuration.

    The same model, policy (seed included) and `max_steps` always give
    the same trace.
    """
    return ITGSim(model, policy).run(max_steps)


@dataclass(frozen=True)
class AcceptResult:
    """Outcome of a trace membership check.

    Attributes
    ----------
    accepted : bool
        Whether the model can produce the trace.
    witness : Tuple[Configuration, ...]
        When accepted, the configurations visited, starting with the
        initial one (length = trace length + 1).
    rejected_at : Union[int, None]
        When rejected, the 1-based position of the first label that no
        reachable configuration can fire.
    """
    accepted: bool
    witness: Tuple[Configuration, ...] = ()
    rejected_at: Optional[int] = None

    def __bool__(self) -> bool:
        return self.accepted


def accepts(
    model: SystemModel, trace: Sequence[Label]
) -> AcceptResult:
    """Check whether `trace` is a run of `model`.

    Breadth-first search over configurations: at each position, every
    configuration reachable so far fires every enabled transition whose
    (caller, channel, callee) label matches. Parameters are not part of the
    label since the channel determines them.

    Examples
    --------
    >>> from itgpy import simulation
    >>> from itgpy.example_models import vending_machine
    >>> vm = vending_machine.load_model()
    >>> bool(simulation.accepts(vm, [
    ...     ("Customer", "acceptCoin", "CoinReceptacle"),
    ...     ("CoinReceptacle", "depositCoin", "CoinStore"),
    ... ]))
    True
    """
    start = initial(model)
    layers: List[Dict[Configuration, Optional[Configuration]]] = [
        {start: None}
    ]
    for position, label in enumerate(trace, start=1):
        label = tuple(label)
        frontier: Dict[Configuration, Optional[Configuration]] = {}
        for config in layers[-1]:
            for candidate in enabled(model, config):
                if candidate.label != label:
                    continue
                nxt = config.advance(
                    candidate.region, candidate.transition.target
                )
                frontier.setdefault(nxt, config)
        if not frontier:
            return AcceptResult(False, rejected_at=position)
        layers.append(frontier)
    witness = [next(iter(layers[-1]))]
    for layer in reversed(layers[1:]):
        witness.append(layer[witness[-1]])
    witness.reverse()
    return AcceptResult(True, tuple(witness))


def format_trace(trace: Iterable[TraceStep]) -> str:
    """Render a trace, one tab-separated step per line.

    Columns: step number (from 1), region, source, caller, channel,
    callee, target.
    """
    lines = []
    for number, s in enumerate(trace, start=1):
        t = s.transition
        lines.append("\t".join((
            str(number), s.region, t.source, t.caller, t.channel, t.callee,
            t.target,
        )))
    return "".join(line + "\n" for line in lines)


def read_trace(text: str) -> List[Label]:
    """Parse trace input: one `caller<TAB>channel<TAB>callee` per line.

    Blank lines and lines starting with `#` are skipped.

    Raises
    ------
    ValueError
        If a line does not hold exactly three tab-separated fields.
    """
    labels = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in stripped.split("\t")]
        if len(fields) != 3:
            raise ValueError(
                f"Trace line {number}: expected 3 tab-separated fields "
                f"but got {len(fields)}."
            )
        labels.append(tuple(fields))
    return labels
