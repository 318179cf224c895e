import logging
import regex as re

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import (
    Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union
)

logger = logging.getLogger(__name__)

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class Direction(str, Enum):
    IN = "in"
    OUT = "out"
    INOUT = "inout"


class AgentKind(str, Enum):
    ACTOR = "actor"
    BLOCK = "block"


class InteractionType(str, Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"


class ViewKind(str, Enum):
    ITGR = "ITGR"
    IBDR = "IBDR"
    SMDR = "SMDR"
    ADR = "ADR"


VIEW_COLUMNS = {
    ViewKind.ITGR: (
        "source", "caller", "channel", "params", "callee", "target"
    ),
    ViewKind.IBDR: ("caller", "channel", "params", "callee"),
    ViewKind.SMDR: ("region", "source", "channel", "target"),
    ViewKind.ADR: (
        "region", "source", "channel", "params", "callee", "target"
    ),
}


@dataclass(frozen=True)
class SourceSpan:
    """Location of a construct in a `.itg` text.

    Attributes
    ----------
    line : int
        1-based line number.
    column : int
        1-based column number.
    length : int
        Number of characters covered. Zero marks a position (e.g. end of
        input).
    """
    line: int
    column: int
    length: int = 0

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(
                "line and column must be >= 1. "
                f"Got line={self.line}, column={self.column}."
            )
        if self.length < 0:
            raise ValueError(
                f"length must be >= 0. Got {self.length}."
            )


@dataclass(frozen=True)
class Parameter:
    """A directed, typed channel parameter, e.g. `in coin: Coin`.

    A `Direction` member is stored as its plain value.
    """
    direction: Union[Direction, str]
    name: str
    ptype: str

    def __post_init__(self):
        if isinstance(self.direction, Direction):
            object.__setattr__(self, "direction", self.direction.value)

    def __str__(self) -> str:
        return f"{self.direction} {self.name}: {self.ptype}"


@dataclass(frozen=True)
class ChannelSignature:
    """A channel name and its ordered parameter list.

    Attributes
    ----------
    name : str
        The channel name.
    params : Tuple[Parameter, ...]
        Ordered parameters. May be empty.
    span : Union[SourceSpan, None]
        Where the channel was declared. Not part of equality.
    """
    name: str
    params: Tuple[Parameter, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)

    def params_text(self, separator: str = "; ") -> str:
        """Join the parameters as `"<dir> <name>: <type>"` entries."""
        return separator.join(str(p) for p in self.params)


@dataclass(frozen=True)
class Agent:
    """An actor (external environment) or a block (system part).

    An `AgentKind` member is stored as its plain value.
    """
    kind: Union[AgentKind, str]
    id: str
    display: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)

    def __post_init__(self):
        if isinstance(self.kind, AgentKind):
            object.__setattr__(self, "kind", self.kind.value)

    @property
    def label(self) -> str:
        return self.display if self.display else self.id


@dataclass(frozen=True)
class Interaction:
    """A handshake of `caller` on `channel` provided by `callee`.

    Agents and channels are referenced by identifier and resolved against
    the owning `SystemModel`.
    """
    caller: str
    channel: str
    callee: str

    @property
    def label(self) -> Tuple[str, str, str]:
        return (self.caller, self.channel, self.callee)


@dataclass(frozen=True)
class Transition:
    source: str
    interaction: Interaction
    target: str
    span: Optional[SourceSpan] = field(default=None, compare=False)

    @property
    def caller(self) -> str:
        return self.interaction.caller

    @property
    def channel(self) -> str:
        return self.interaction.channel

    @property
    def callee(self) -> str:
        return self.interaction.callee


@dataclass(frozen=True)
class Region:
    """One orthogonal region: states, initial state and transitions.

    Attributes
    ----------
    id : str
        Region identifier.
    states : FrozenSet[str]
        The state set of the region.
    initial : str
        The initial state. Must be a member of `states`.
    transitions : Tuple[Transition, ...]
        The region's transition relation in declaration order.
    span : Union[SourceSpan, None]
        Where the region was declared. Not part of equality.
    """
    id: str
    states: FrozenSet[str]
    initial: str
    transitions: Tuple[Transition, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class SystemModel:
    """A named set of declarations plus its orthogonal regions.

    Declarations and regions keep their declaration order, which fixes the
    order of every projected view and of simulator candidates.

    Examples
    --------
    >>> from itgpy import model
    >>> ping = model.Interaction("A", "ping", "B")
    >>> m = model.SystemModel(
    ...     name="M",
    ...     agents=(
    ...         model.Agent("actor", "A"), model.Agent("block", "B")
    ...     ),
    ...     channels=(model.ChannelSignature("ping"),),
    ...     regions=(
    ...         model.Region(
    ...             id="R",
    ...             states=frozenset({"s1", "s2"}),
    ...             initial="s1",
    ...             transitions=(
    ...                 model.Transition("s1", ping, "s2"),
    ...                 model.Transition("s2", ping, "s1"),
    ...             ),
    ...         ),
    ...     ),
    ... )
    >>> model.validate(m)
    []
    """
    name: str
    agents: Tuple[Agent, ...] = ()
    channels: Tuple[ChannelSignature, ...] = ()
    regions: Tuple[Region, ...] = ()

    @cached_property
    def agent_index(self) -> Dict[str, Agent]:
        index = {}
        for agent in self.agents:
            index.setdefault(agent.id, agent)
        return index

    @cached_property
    def channel_index(self) -> Dict[str, ChannelSignature]:
        index = {}
        for channel in self.channels:
            index.setdefault(channel.name, channel)
        return index

    @property
    def region_ids(self) -> Tuple[str, ...]:
        return tuple(region.id for region in self.regions)

    def params_of(self, channel: str) -> Tuple[Parameter, ...]:
        """Parameters of a declared channel, or `()` if undeclared."""
        signature = self.channel_index.get(channel)
        return signature.params if signature is not None else ()


@dataclass(frozen=True)
class Diagnostic:
    """A rule violation found in a model.

    Attributes
    ----------
    rule : str
        Rule code, e.g. `UNDECLARED_STATE`.
    message : str
        Human readable description.
    region : Union[str, None]
        Region the violation belongs to, if any.
    row : Union[int, None]
        0-based transition index within `region`, if any.
    span : Union[SourceSpan, None]
        Source location when the model was parsed from text.
    severity : str
        `"error"` or `"warning"`.
    """
    rule: str
    message: str
    region: Optional[str] = None
    row: Optional[int] = None
    span: Optional[SourceSpan] = None
    severity: str = "error"


@dataclass(frozen=True)
class ViewRelation:
    """A relational table projected from (or composing) a model.

    Attributes
    ----------
    kind : ViewKind
        Which relation the rows belong to. Fixes the row schema, see
        `columns`.
    rows : Tuple[tuple, ...]
        Ordered rows. The `params` column holds a tuple of `Parameter`.
    provenance : Tuple[str, ...]
        Region id for every row. For SMDR/ADR it repeats the region
        column; for IBDR it is the region of the first occurrence.
    """
    kind: ViewKind
    rows: Tuple[tuple, ...] = ()
    provenance: Tuple[str, ...] = ()

    def __post_init__(self):
        width = len(VIEW_COLUMNS[self.kind])
        for row in self.rows:
            if len(row) != width:
                raise ValueError(
                    f"Expected {width} cells per {self.kind.value} row but "
                    f"got {len(row)}: {row!r}."
                )
        if self.provenance and len(self.provenance) != len(self.rows):
            raise ValueError(
                "provenance must have one region id per row. Got "
                f"{len(self.provenance)} ids for {len(self.rows)} rows."
            )

    @property
    def columns(self) -> Tuple[str, ...]:
        return VIEW_COLUMNS[self.kind]

    def __len__(self) -> int:
        return len(self.rows)

    def region_groups(self) -> Dict[str, List[tuple]]:
        """Rows grouped by region, in first-appearance order."""
        groups: Dict[str, List[tuple]] = {}
        for region, row in zip(self.provenance, self.rows):
            groups.setdefault(region, []).append(row)
        return groups


class CompositionError(ValueError):
    """Raised when regions cannot be orthogonally composed."""
    def __init__(self, rule: str, message: str):
        super().__init__(message)
        self.rule = rule


@dataclass(frozen=True)
class AgentInterface:
    """Channels an agent requires (as caller) and provides (as callee)."""
    required: Tuple[str, ...] = ()
    provided: Tuple[str, ...] = ()


@dataclass(frozen=True)
class EntitySets:
    """The populated entity sets of a model."""
    channel_signatures: FrozenSet[Tuple[str, Tuple[Parameter, ...]]]
    channel_names: FrozenSet[str]
    parameter_lists: FrozenSet[Tuple[Parameter, ...]]
    actors: FrozenSet[str]
    blocks: FrozenSet[str]
    agents: FrozenSet[str]
    type1_interactions: FrozenSet[Interaction]
    type2_interactions: FrozenSet[Interaction]
    interactions: FrozenSet[Interaction]
    states: FrozenSet[str]

    def counts(self) -> Dict[str, int]:
        return {
            "channel signatures": len(self.channel_signatures),
            "channel names": len(self.channel_names),
            "parameter lists": len(self.parameter_lists),
            "actors": len(self.actors),
            "blocks": len(self.blocks),
            "actors or blocks": len(self.agents),
            "type 1 interactions": len(self.type1_interactions),
            "type 2 interactions": len(self.type2_interactions),
            "interactions": len(self.interactions),
            "states": len(self.states),
        }


def _is_identifier(value) -> bool:
    return isinstance(value, str) and IDENTIFIER.fullmatch(value) is not None


def _check_channels(model: SystemModel) -> List[Diagnostic]:
    diagnostics = []
    seen: Dict[str, ChannelSignature] = {}
    directions = {d.value for d in Direction}
    for channel in model.channels:
        if not _is_identifier(channel.name):
            diagnostics.append(Diagnostic(
                "INVALID_IDENTIFIER",
                f"channel name {channel.name!r} is not an identifier",
                span=channel.span,
            ))
        names = set()
        for param in channel.params:
            if param.direction not in directions:
                diagnostics.append(Diagnostic(
                    "INVALID_DIRECTION",
                    f"parameter '{param.name}' of channel '{channel.name}' "
                    f"has direction {param.direction!r}; expected in, out "
                    "or inout",
                    span=channel.span,
                ))
            for value, what in ((param.name, "name"), (param.ptype, "type")):
                if not _is_identifier(value):
                    diagnostics.append(Diagnostic(
                        "INVALID_IDENTIFIER",
                        f"parameter {what} {value!r} of channel "
                        f"'{channel.name}' is not an identifier",
                        span=channel.span,
                    ))
            if param.name in names:
                diagnostics.append(Diagnostic(
                    "DUPLICATE_PARAM",
                    f"parameter '{param.name}' appears more than once in "
                    f"channel '{channel.name}'",
                    span=channel.span,
                ))
            names.add(param.name)
        previous = seen.get(channel.name)
        if previous is None:
            seen[channel.name] = channel
        elif previous.params == channel.params:
            diagnostics.append(Diagnostic(
                "DUPLICATE_CHANNEL",
                f"channel '{channel.name}' is declared more than once",
                span=channel.span,
            ))
        else:
            diagnostics.append(Diagnostic(
                "CHANNEL_OVERLOAD",
                f"channel '{channel.name}' is redeclared with a different "
                "parameter list",
                span=channel.span,
            ))
    return diagnostics


def _check_agents(model: SystemModel) -> List[Diagnostic]:
    diagnostics = []
    seen = set()
    kinds = {k.value for k in AgentKind}
    for agent in model.agents:
        if agent.kind not in kinds:
            diagnostics.append(Diagnostic(
                "INVALID_AGENT_KIND",
                f"agent '{agent.id}' has kind {agent.kind!r}; expected "
                "actor or block",
                span=agent.span,
            ))
        if not _is_identifier(agent.id):
            diagnostics.append(Diagnostic(
                "INVALID_IDENTIFIER",
                f"agent id {agent.id!r} is not an identifier",
                span=agent.span,
            ))
        if agent.display is not None and (
            "\n" in agent.display or "\r" in agent.display
        ):
            diagnostics.append(Diagnostic(
                "INVALID_DISPLAY",
                f"display name of agent '{agent.id}' contains a line break",
                span=agent.span,
            ))
        if agent.id in seen:
            diagnostics.append(Diagnostic(
                "DUPLICATE_AGENT",
                f"agent '{agent.id}' is declared more than once",
                span=agent.span,
            ))
        seen.add(agent.id)
    return diagnostics


def _check_transition(
    model: SystemModel, region: Region, row: int, transition: Transition
) -> List[Diagnostic]:
    diagnostics = []

    def emit(rule: str, message: str):
        diagnostics.append(Diagnostic(
            rule, message, region=region.id, row=row, span=transition.span
        ))

    for state in (transition.source, transition.target):
        if state not in region.states:
            emit(
                "UNDECLARED_STATE",
                f"state '{state}' is not a state of region '{region.id}'",
            )
    caller = model.agent_index.get(transition.caller)
    callee = model.agent_index.get(transition.callee)
    if caller is None:
        emit(
            "UNDECLARED_AGENT",
            f"caller '{transition.caller}' is not a declared actor or block",
        )
    if callee is None:
        emit(
            "UNDECLARED_AGENT",
            f"callee '{transition.callee}' is not a declared actor or block",
        )
    elif callee.kind != AgentKind.BLOCK.value:
        emit(
            "CALLEE_NOT_BLOCK",
            f"callee '{transition.callee}' is an actor; only blocks can "
            "provide a channel",
        )
    if transition.channel not in model.channel_index:
        emit(
            "UNDECLARED_CHANNEL",
            f"channel '{transition.channel}' is not declared",
        )
    return diagnostics


def _check_regions(model: SystemModel) -> List[Diagnostic]:
    diagnostics = []
    region_ids = set()
    state_owner: Dict[str, str] = {}
    for region in model.regions:
        if not _is_identifier(region.id):
            diagnostics.append(Diagnostic(
                "INVALID_IDENTIFIER",
                f"region id {region.id!r} is not an identifier",
                region=region.id, span=region.span,
            ))
        if region.id in region_ids:
            diagnostics.append(Diagnostic(
                "DUPLICATE_REGION_ID",
                f"region '{region.id}' is declared more than once",
                region=region.id, span=region.span,
            ))
        region_ids.add(region.id)
        if region.initial not in region.states:
            diagnostics.append(Diagnostic(
                "INITIAL_NOT_IN_STATES",
                f"initial state '{region.initial}' is not a state of "
                f"region '{region.id}'",
                region=region.id, span=region.span,
            ))
        for state in sorted(region.states):
            if not _is_identifier(state):
                diagnostics.append(Diagnostic(
                    "INVALID_IDENTIFIER",
                    f"state id {state!r} is not an identifier",
                    region=region.id, span=region.span,
                ))
            owner = state_owner.setdefault(state, region.id)
            if owner != region.id:
                diagnostics.append(Diagnostic(
                    "STATE_COLLISION",
                    f"state '{state}' of region '{region.id}' is also a "
                    f"state of region '{owner}'",
                    region=region.id, span=region.span,
                ))
        rows = set()
        for row, transition in enumerate(region.transitions):
            key = (transition.source, transition.interaction, transition.target)
            if key in rows:
                diagnostics.append(Diagnostic(
                    "DUPLICATE_ROW",
                    f"transition {transition.source} -> {transition.target} "
                    f"on {transition.channel} repeats an earlier row",
                    region=region.id, row=row, span=transition.span,
                ))
            rows.add(key)
            diagnostics.extend(
                _check_transition(model, region, row, transition)
            )
    return diagnostics


def validate(model: SystemModel) -> List[Diagnostic]:
    """Check a model against the well-formedness rules.

    Returns every violation found; an empty list means the model is valid.
    Malformed references are reported, never raised.

    Parameters
    ----------
    model : SystemModel
        The model to check.

    Returns
    -------
    List[Diagnostic]
        Violations in declaration order: channels, agents, regions.

    Examples
    --------
    >>> from itgpy.example_models import vending_machine
    >>> from itgpy import model
    >>> model.validate(vending_machine.load_model())
    []
    """
    if not isinstance(model, SystemModel):
        raise TypeError(
            f"Expected type SystemModel but got {type(model)}."
        )
    diagnostics = []
    if not _is_identifier(model.name):
        diagnostics.append(Diagnostic(
            "INVALID_IDENTIFIER",
            f"system name {model.name!r} is not an identifier",
        ))
    diagnostics.extend(_check_channels(model))
    diagnostics.extend(_check_agents(model))
    diagnostics.extend(_check_regions(model))
    logger.debug(
        "validated model '%s': %d diagnostic(s)", model.name, len(diagnostics)
    )
    return diagnostics


def classify(
    interaction: Interaction, model: SystemModel
) -> InteractionType:
    """Type 1 if the caller is an actor, type 2 if it is a block.

    Raises
    ------
    ValueError
        If the caller is not declared in `model`.
    """
    caller = model.agent_index.get(interaction.caller)
    if caller is None:
        raise ValueError(
            f"Unknown caller '{interaction.caller}'. The interaction must "
            "reference a declared agent."
        )
    if caller.kind == AgentKind.ACTOR.value:
        return InteractionType.TYPE1
    return InteractionType.TYPE2


def compose(
    regions: Sequence[Region],
    channels: Iterable[ChannelSignature] = (),
) -> ViewRelation:
    """Orthogonally compose regions into the system transition relation.

    The result is the region-tagged disjoint union of every region's
    transitions, region by region in the given order. No rows are merged.

    Parameters
    ----------
    regions : Sequence[Region]
        Regions to compose. Ids and state sets must be disjoint.
    channels : Iterable[ChannelSignature]
        Declarations used to fill the params column. Undeclared channels
        get an empty parameter list.

    Returns
    -------
    ViewRelation
        An ITGR view whose provenance names each row's region.

    Raises
    ------
    CompositionError
        `DUPLICATE_REGION_ID` or `STATE_COLLISION`.
    """
    params = {}
    for channel in channels:
        params.setdefault(channel.name, channel.params)
    owners: Dict[str, str] = {}
    region_ids = set()
    rows = []
    provenance = []
    for region in regions:
        if region.id in region_ids:
            raise CompositionError(
                "DUPLICATE_REGION_ID",
                f"Region '{region.id}' appears more than once.",
            )
        for state in sorted(region.states):
            if state in owners:
                raise CompositionError(
                    "STATE_COLLISION",
                    f"State '{state}' belongs to regions '{owners[state]}' "
                    f"and '{region.id}'.",
                )
        region_ids.add(region.id)
        for state in region.states:
            owners[state] = region.id
        for t in region.transitions:
            rows.append((
                t.source, t.caller, t.channel, params.get(t.channel, ()),
                t.callee, t.target,
            ))
            provenance.append(region.id)
    return ViewRelation(ViewKind.ITGR, tuple(rows), tuple(provenance))


def system_itgr(model: SystemModel) -> ViewRelation:
    """Compose all regions of `model` into its system ITGR view."""
    return compose(model.regions, model.channels)


def reachability_lint(model: SystemModel) -> List[Diagnostic]:
    """Warn about states unreachable from their region's initial state.

    Returns
    -------
    List[Diagnostic]
        One `UNREACHABLE_STATE` warning per unreachable state, regions in
        declaration order, states sorted by id.
    """
    warnings_out = []
    for region in model.regions:
        successors: Dict[str, List[str]] = {}
        for t in region.transitions:
            successors.setdefault(t.source, []).append(t.target)
        reached = {region.initial}
        queue = deque([region.initial])
        while queue:
            state = queue.popleft()
            for nxt in successors.get(state, []):
                if nxt not in reached:
                    reached.add(nxt)
                    queue.append(nxt)
        for state in sorted(region.states - reached):
            warnings_out.append(Diagnostic(
                "UNREACHABLE_STATE",
                f"state '{state}' cannot be reached from initial state "
                f"'{region.initial}'",
                region=region.id, span=region.span, severity="warning",
            ))
    return warnings_out


def interfaces(model: SystemModel) -> Dict[str, AgentInterface]:
    """Required and provided channels of every declared agent.

    A channel is required by the caller of an interaction and provided by
    its callee. Channels are listed in first-occurrence order over the
    composed transition relation.
    """
    required: Dict[str, List[str]] = {a.id: [] for a in model.agents}
    provided: Dict[str, List[str]] = {a.id: [] for a in model.agents}
    for region in model.regions:
        for t in region.transitions:
            for table, agent in ((required, t.caller), (provided, t.callee)):
                channels = table.setdefault(agent, [])
                if t.channel not in channels:
                    channels.append(t.channel)
    agents = list(required) + [a for a in provided if a not in required]
    return {
        agent: AgentInterface(
            tuple(required.get(agent, ())), tuple(provided.get(agent, ()))
        )
        for agent in agents
    }


def entity_sets(model: SystemModel) -> EntitySets:
    """Collect the populated entity sets of a model."""
    actors = frozenset(
        a.id for a in model.agents if a.kind == AgentKind.ACTOR.value
    )
    blocks = frozenset(
        a.id for a in model.agents if a.kind == AgentKind.BLOCK.value
    )
    interactions = frozenset(
        t.interaction for r in model.regions for t in r.transitions
    )
    return EntitySets(
        channel_signatures=frozenset(
            (c.name, c.params) for c in model.channels
        ),
        channel_names=frozenset(c.name for c in model.channels),
        parameter_lists=frozenset(c.params for c in model.channels),
        actors=actors,
        blocks=blocks,
        agents=actors | blocks,
        type1_interactions=frozenset(
            i for i in interactions if i.caller in actors
        ),
        type2_interactions=frozenset(
            i for i in interactions if i.caller in blocks
        ),
        interactions=interactions,
        states=frozenset(s for r in model.regions for s in r.states),
    )
