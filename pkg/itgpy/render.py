import logging
import pandas as pd
import regex as re

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Union

from itgpy.model import (
    Agent,
    AgentKind,
    SystemModel,
    ViewKind,
    ViewRelation,
)

logger = logging.getLogger(__name__)

CSV_HEADERS = {
    ViewKind.ITGR: [
        "state_from", "caller", "channel", "params", "callee", "state_to"
    ],
    ViewKind.IBDR: ["caller", "channel", "params", "callee"],
    ViewKind.SMDR: ["region", "state_from", "channel", "state_to"],
    ViewKind.ADR: [
        "region", "state_from", "channel", "params", "callee", "state_to"
    ],
}

_DOT_PLAIN_ID = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_DOT_KEYWORDS = {"node", "edge", "graph", "digraph", "subgraph", "strict"}


@dataclass
class CsvDoc:
    """A rendered relational table.

    Attributes
    ----------
    header : List[str]
        Column names.
    rows : List[List[str]]
        Text cells, each row as wide as `header`.
    """
    header: List[str]
    rows: List[List[str]] = field(default_factory=list)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.header):
                raise ValueError(
                    f"Expected {len(self.header)} cells per row but got "
                    f"{len(row)}: {row!r}."
                )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.header, dtype=object)

    @property
    def text(self) -> str:
        """RFC 4180 style text with LF line endings.

        Cells containing a comma, quote or line break are double-quoted
        with inner quotes doubled.
        """
        return self.to_frame().to_csv(index=False, lineterminator="\n")


@dataclass(frozen=True)
class DotDoc:
    """A directed graph in the DOT language."""
    text: str

    def __str__(self) -> str:
        return self.text


def params_cell(params: Iterable, separator: str = "; ") -> str:
    """Join parameters as `"<dir> <name>: <type>"` entries."""
    return separator.join(str(p) for p in params)


def _cells(row: tuple) -> List[str]:
    return [
        params_cell(cell) if isinstance(cell, tuple) else str(cell)
        for cell in row
    ]


def to_csv(view: ViewRelation) -> CsvDoc:
    """Serialize a view relation as a CSV table.

    Rows keep the order of `view`. The params column holds the `; `-joined
    parameter entries, or an empty string for a channel with no
    parameters.

    Examples
    --------
    >>> from itgpy import projection, render
    >>> from itgpy.example_models import vending_machine
    >>> smdr = projection.project_smd(vending_machine.load_model())
    >>> render.to_csv(smdr).text.splitlines()[-1]
    'R5,s51,refillChangeCoin,s51'
    """
    doc = CsvDoc(
        list(CSV_HEADERS[view.kind]), [_cells(row) for row in view.rows]
    )
    logger.debug("rendered %s as CSV: %d rows", view.kind.value, len(doc.rows))
    return doc


def to_json(view: ViewRelation) -> Dict[str, list]:
    """Column-oriented form of `to_csv`: column name to list of cells."""
    frame = to_csv(view).to_frame()
    return {c: frame.loc[:, c].tolist() for c in frame.columns}


def dot_id(value: str) -> str:
    """Quote `value` as a DOT ID unless it is a plain identifier."""
    if _DOT_PLAIN_ID.fullmatch(value) and value.lower() not in _DOT_KEYWORDS:
        return value
    return dot_string(value)


def dot_string(value: str) -> str:
    escaped = (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\r", "")
        .replace("\n", "\\n")
    )
    return f'"{escaped}"'


class _DotWriter:
    def __init__(self, name: str):
        self._lines = [f"digraph {dot_id(name)} {{"]
        self._depth = 1

    def line(self, text: str):
        self._lines.append("    " * self._depth + text)

    def open_cluster(self, region: str):
        self.line(f"subgraph {dot_id('cluster_' + region)} {{")
        self._depth += 1
        self.line(f"label={dot_string(region)};")

    def close(self):
        self._depth -= 1
        self.line("}")

    def edge(self, source: str, target: str, label: Optional[str] = None):
        attrs = "" if label is None else f" [label={dot_string(label)}]"
        self.line(f"{dot_id(source)} -> {dot_id(target)}{attrs};")

    def document(self) -> DotDoc:
        return DotDoc("\n".join(self._lines + ["}"]) + "\n")


def _state_clusters(
    name: str,
    groups: Dict[str, List[tuple]],
    initial: Mapping[str, str],
    states: Mapping[str, Iterable[str]],
) -> DotDoc:
    """Lay out regions side by side, one cluster each.

    `groups` maps a region to `(source, label, target)` triples.
    """
    dot = _DotWriter(name)
    for region, edges in groups.items():
        dot.open_cluster(region)
        seen: List[str] = []
        for state in list(states.get(region, ())) + [
            s for source, _, target in edges for s in (source, target)
        ]:
            if state not in seen:
                seen.append(state)
        for state in seen:
            dot.line(f"{dot_id(state)} [shape=circle];")
        start = initial.get(region)
        if start is None and edges:
            start = edges[0][0]
        if start is not None:
            entry = f"entry {region}"
            dot.line(f"{dot_id(entry)} [shape=point, style=invis];")
            dot.edge(entry, start)
        for source, label, target in edges:
            dot.edge(source, target, label)
        dot.close()
    return dot.document()


def to_dot_itg(model: SystemModel) -> DotDoc:
    """Render the composed ITG, one cluster per region.

    Edges are labelled `caller.channel→callee`. Every declared state is
    drawn, including states no transition touches.
    """
    groups = {
        r.id: [
            (t.source, f"{t.caller}.{t.channel}→{t.callee}", t.target)
            for t in r.transitions
        ]
        for r in model.regions
    }
    return _state_clusters(
        model.name,
        groups,
        {r.id: r.initial for r in model.regions},
        {r.id: sorted(r.states) for r in model.regions},
    )


def _initial_map(initial) -> Dict[str, str]:
    if initial is None:
        return {}
    if isinstance(initial, SystemModel):
        return {r.id: r.initial for r in initial.regions}
    return dict(initial)


def to_dot_smd(
    view: ViewRelation,
    initial: Union[SystemModel, Mapping[str, str], None] = None,
) -> DotDoc:
    """Render an SMDR view as state machines with edges labelled `channel`.

    Parameters
    ----------
    view : ViewRelation
        An SMDR view.
    initial : Union[SystemModel, Mapping[str, str], None]
        Initial state per region, or the model to read them from. Without
        it the source of a region's first row is taken as initial.
    """
    if view.kind != ViewKind.SMDR:
        raise ValueError(f"Expected an SMDR view but got {view.kind.value}.")
    groups: Dict[str, List[tuple]] = {}
    for region, source, channel, target in view.rows:
        groups.setdefault(region, []).append((source, channel, target))
    return _state_clusters("SMDR", groups, _initial_map(initial), {})


def to_dot_ad(
    view: ViewRelation,
    initial: Union[SystemModel, Mapping[str, str], None] = None,
) -> DotDoc:
    """Render an ADR view with edges labelled `channel [params] callee`."""
    if view.kind != ViewKind.ADR:
        raise ValueError(f"Expected an ADR view but got {view.kind.value}.")
    groups: Dict[str, List[tuple]] = {}
    for region, source, channel, params, callee, target in view.rows:
        label = f"{channel} [{params_cell(params)}] {callee}"
        groups.setdefault(region, []).append((source, label, target))
    return _state_clusters("ADR", groups, _initial_map(initial), {})


def _agent_map(agents) -> Dict[str, Agent]:
    if agents is None:
        return {}
    if isinstance(agents, SystemModel):
        return dict(agents.agent_index)
    if isinstance(agents, Mapping):
        return dict(agents)
    return {a.id: a for a in agents}


def to_dot_ibd(
    view: ViewRelation,
    agents: Union[SystemModel, Mapping[str, Agent], Iterable[Agent], None] = None,
) -> DotDoc:
    """Render an IBDR view as a connection graph between agents.

    One node per distinct caller or callee, actors as double octagons and
    blocks as boxes, labelled with display names where declared. One edge
    per row, from caller to callee, labelled `channel(params)`.

    Parameters
    ----------
    view : ViewRelation
        An IBDR view.
    agents : Union[SystemModel, Mapping[str, Agent], Iterable[Agent], None]
        Agent declarations for shapes and labels. An agent that is not
        declared is drawn as an actor if it never appears as a callee.

    Examples
    --------
    >>> from itgpy import model, render
    >>> view = model.ViewRelation(
    ...     model.ViewKind.IBDR, (("A", "ping", (), "B"),)
    ... )
    >>> print(render.to_dot_ibd(view).text, end="")
    digraph IBDR {
        A [shape=doubleoctagon, label="A"];
        B [shape=box, label="B"];
        A -> B [label="ping()"];
    }
    """
    if view.kind != ViewKind.IBDR:
        raise ValueError(f"Expected an IBDR view but got {view.kind.value}.")
    declared = _agent_map(agents)
    callees = {row[3] for row in view.rows}
    nodes: List[str] = []
    for caller, _, _, callee in view.rows:
        for agent in (caller, callee):
            if agent not in nodes:
                nodes.append(agent)
    dot = _DotWriter("IBDR")
    for node in nodes:
        agent = declared.get(node)
        if agent is not None:
            is_actor = agent.kind == AgentKind.ACTOR.value
            label = agent.label
        else:
            is_actor = node not in callees
            label = node
        shape = "doubleoctagon" if is_actor else "box"
        dot.line(f"{dot_id(node)} [shape={shape}, label={dot_string(label)}];")
    for caller, channel, params, callee in view.rows:
        dot.edge(caller, callee, f"{channel}({params_cell(params, ', ')})")
    return dot.document()


def artifact_name(model_name: str, view: str, fmt: str) -> str:
    """File name for a rendered view, `<model>.<view>.<fmt>`."""
    return f"{model_name}.{view}.{fmt}"
