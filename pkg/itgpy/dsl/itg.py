import os
import json
import logging
import warnings
import regex as re

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

from itgpy.model import (
    Agent,
    ChannelSignature,
    Interaction,
    Parameter,
    Region,
    SourceSpan,
    SystemModel,
    Transition,
    validate,
)

logger = logging.getLogger(__name__)

DIRECTIONS = ("in", "out", "inout")

_TOKEN_PATTERN = r"""
    (?P<COMMENT>\#[^\n]*)
  | (?P<NEWLINE>\n)
  | (?P<WS>[\x20\t\r\f]+)
  | (?P<ARROW>->)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<STRING>"(?:[^"\\\n]|\\["\\])*")
  | (?P<LBRACE>\{)
  | (?P<RBRACE>\})
  | (?P<LPAREN>\()
  | (?P<RPAREN>\))
  | (?P<COMMA>,)
  | (?P<COLON>:)
  | (?P<MISMATCH>.)
"""
_TOKEN_RE = re.compile(_TOKEN_PATTERN, flags=re.VERBOSE)
_ESCAPE_RE = re.compile(r'\\(["\\])')

_TOKEN_NAMES = {
    "ARROW": "'->'",
    "IDENT": "an identifier",
    "STRING": "a string",
    "LBRACE": "'{'",
    "RBRACE": "'}'",
    "LPAREN": "'('",
    "RPAREN": "')'",
    "COMMA": "','",
    "COLON": "':'",
    "EOF": "end of input",
}


@dataclass(frozen=True)
class ParseDiagnostic:
    """A lexical or syntax error in `.itg` text."""
    span: SourceSpan
    message: str
    code: str

    def __post_init__(self):
        if not self.message:
            raise ValueError("message must be a non-empty string.")


class ITGParseError(ValueError):
    """Raised by `ITGReader.get_model()` when the text does not parse.

    Attributes
    ----------
    diagnostics : List[ParseDiagnostic]
        The parse diagnostics, earliest first.
    """
    def __init__(self, diagnostics: List[ParseDiagnostic]):
        first = diagnostics[0]
        super().__init__(
            f"{first.span.line}:{first.span.column}: {first.code}: "
            f"{first.message}"
        )
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.column, len(self.value))


def _describe(token: _Token) -> str:
    if token.kind == "EOF":
        return "end of input"
    return f"'{token.value}'"


def _tokenize(text: str) -> Tuple[List[_Token], List[ParseDiagnostic]]:
    """Split `text` into significant tokens.

    Comments, blank lines and whitespace are dropped. Lexical errors are
    collected, at most one per line.
    """
    tokens = []
    errors = []
    line = 1
    line_start = 0
    error_lines = set()
    for match in _TOKEN_RE.finditer(text):
        kind = match.lastgroup
        value = match.group()
        column = match.start() - line_start + 1
        if kind == "NEWLINE":
            line += 1
            line_start = match.end()
            continue
        if kind in ("WS", "COMMENT"):
            continue
        if kind == "MISMATCH":
            if line not in error_lines:
                if value == '"':
                    message = "unterminated or malformed string literal"
                else:
                    message = f"unexpected character {value!r}"
                errors.append(ParseDiagnostic(
                    SourceSpan(line, column, 1), message, "LEX_ERROR"
                ))
                error_lines.add(line)
            continue
        tokens.append(_Token(kind, value, line, column))
    tokens.append(_Token("EOF", "", line, len(text) - line_start + 1))
    return tokens, errors


class _SyntaxError(Exception):
    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(diagnostic.message)
        self.diagnostic = diagnostic


class _Parser:
    """Recursive descent over the token list. Keywords are contextual."""

    def __init__(self, tokens: List[_Token]):
        self._tokens = tokens
        self._pos = 0

    def _peek(self, offset: int = 0) -> _Token:
        index = min(self._pos + offset, len(self._tokens) - 1)
        return self._tokens[index]

    def _advance(self) -> _Token:
        token = self._peek()
        if token.kind != "EOF":
            self._pos += 1
        return token

    def _fail(self, token: _Token, expected: str):
        raise _SyntaxError(ParseDiagnostic(
            token.span,
            f"expected {expected} but found {_describe(token)}",
            "SYNTAX_ERROR",
        ))

    def _expect(self, kind: str, value: Optional[str] = None) -> _Token:
        token = self._peek()
        if token.kind != kind or (value is not None and token.value != value):
            expected = f"'{value}'" if value is not None else _TOKEN_NAMES[kind]
            self._fail(token, expected)
        return self._advance()

    def _at_keyword(self, *keywords: str) -> bool:
        token = self._peek()
        return token.kind == "IDENT" and token.value in keywords

    def parse_model(self) -> SystemModel:
        self._expect("IDENT", "system")
        name = self._expect("IDENT").value
        agents = []
        channels = []
        while self._at_keyword("actor", "block", "channel"):
            if self._peek().value == "channel":
                channels.append(self._parse_channel())
            else:
                agents.append(self._parse_agent())
        regions = []
        while self._at_keyword("region"):
            regions.append(self._parse_region())
        token = self._peek()
        if token.kind != "EOF":
            expected = "'region'" if regions else (
                "'actor', 'block', 'channel' or 'region'"
            )
            self._fail(token, expected)
        return SystemModel(
            name=name,
            agents=tuple(agents),
            channels=tuple(channels),
            regions=tuple(regions),
        )

    def _parse_agent(self) -> Agent:
        keyword = self._advance()
        ident = self._expect("IDENT").value
        display = None
        if self._peek().kind == "STRING":
            raw = self._advance().value[1:-1]
            display = _ESCAPE_RE.sub(r"\1", raw)
        return Agent(keyword.value, ident, display, span=keyword.span)

    def _parse_channel(self) -> ChannelSignature:
        keyword = self._advance()
        name = self._expect("IDENT").value
        self._expect("LPAREN")
        params = []
        if self._peek().kind != "RPAREN":
            params.append(self._parse_param())
            while self._peek().kind == "COMMA":
                self._advance()
                params.append(self._parse_param())
        self._expect("RPAREN")
        return ChannelSignature(name, tuple(params), span=keyword.span)

    def _parse_param(self) -> Parameter:
        token = self._peek()
        if token.kind != "IDENT" or token.value not in DIRECTIONS:
            self._fail(token, "'in', 'out' or 'inout'")
        direction = self._advance().value
        name = self._expect("IDENT").value
        self._expect("COLON")
        ptype = self._expect("IDENT").value
        return Parameter(direction, name, ptype)

    def _parse_region(self) -> Region:
        keyword = self._advance()
        ident = self._expect("IDENT").value
        self._expect("IDENT", "initial")
        initial = self._expect("IDENT").value
        self._expect("LBRACE")
        states = []
        transitions = []
        while self._peek().kind != "RBRACE":
            token = self._peek()
            if token.kind != "IDENT":
                self._fail(token, "a transition, 'state' or '}'")
            if token.value == "state" and self._peek(1).kind == "IDENT":
                self._advance()
                states.append(self._advance().value)
            else:
                transition = self._parse_transition()
                states.extend((transition.source, transition.target))
                transitions.append(transition)
        self._expect("RBRACE")
        return Region(
            id=ident,
            states=frozenset(states),
            initial=initial,
            transitions=tuple(transitions),
            span=keyword.span,
        )

    def _parse_transition(self) -> Transition:
        first = self._expect("IDENT")
        self._expect("ARROW")
        target = self._expect("IDENT").value
        self._expect("COLON")
        caller = self._expect("IDENT").value
        channel = self._expect("IDENT").value
        last = self._expect("IDENT")
        if last.line == first.line:
            length = last.column + len(last.value) - first.column
        else:
            length = len(first.value)
        return Transition(
            first.value,
            Interaction(caller, channel, last.value),
            target,
            span=SourceSpan(first.line, first.column, length),
        )


def parse(text: str) -> Union[SystemModel, List[ParseDiagnostic]]:
    """Parse `.itg` text into a `SystemModel`.

    Declaration and transition order is preserved. Semantic problems
    (duplicate declarations, undeclared names) are left to
    `itgpy.model.validate`.

    Parameters
    ----------
    text : str
        The model text.

    Returns
    -------
    Union[SystemModel, List[ParseDiagnostic]]
        The model, or the diagnostics (earliest first) if the text does not
        parse. Lexical errors are reported once per line and the offending
        characters are left out of the token stream, so the first syntax
        error is found too and merged in by position.

    Examples
    --------
    >>> from itgpy.dsl import parse
    >>> m = parse(
    ...     "system M\\nactor A\\nblock B\\nchannel ping(in x: Int)\\n"
    ...     "region R initial s1 { s1 -> s2 : A ping B\\n"
    ...     " s2 -> s1 : A ping B }"
    ... )
    >>> len(m.regions[0].transitions)
    2
    """
    if not isinstance(text, str):
        raise TypeError(f"Expected type str but got {type(text)}.")
    tokens, errors = _tokenize(text)
    try:
        model = _Parser(tokens).parse_model()
    except _SyntaxError as error:
        errors = errors + [error.diagnostic]
    if errors:
        return sorted(errors, key=lambda d: (d.span.line, d.span.column))
    return model


def _write_string(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def print_model(model: SystemModel) -> str:
    """Render a model as canonical `.itg` text.

    Agents come first, then channels, then regions, each in declaration
    order. Transitions are written one per line with two-space indentation.
    States that no transition mentions are written as `state` lines.

    Examples
    --------
    >>> from itgpy.dsl import print_model
    >>> from itgpy.model import SystemModel
    >>> print_model(SystemModel(name="M"))
    'system M\\n'
    """
    if not isinstance(model, SystemModel):
        raise TypeError(f"Expected type SystemModel but got {type(model)}.")
    lines = [f"system {model.name}"]
    if model.agents:
        lines.append("")
        for agent in model.agents:
            line = f"{agent.kind} {agent.id}"
            if agent.display is not None:
                line += " " + _write_string(agent.display)
            lines.append(line)
    if model.channels:
        lines.append("")
        for channel in model.channels:
            lines.append(
                f"channel {channel.name}({channel.params_text(', ')})"
            )
    for region in model.regions:
        lines.append("")
        lines.append(f"region {region.id} initial {region.initial} {{")
        mentioned = set()
        for t in region.transitions:
            mentioned.update((t.source, t.target))
        for state in sorted(region.states - mentioned):
            lines.append(f"  state {state}")
        for t in region.transitions:
            lines.append(
                f"  {t.source} -> {t.target} : "
                f"{t.caller} {t.channel} {t.callee}"
            )
        lines.append("}")
    return "\n".join(lines) + "\n"


def model_to_dict(model: SystemModel) -> Dict[str, Any]:
    """JSON-compatible dictionary form of a model."""
    return {
        "system": model.name,
        "agents": [
            {"kind": a.kind, "id": a.id, "display": a.display}
            for a in model.agents
        ],
        "channels": [
            {
                "name": c.name,
                "params": [
                    {"direction": p.direction, "name": p.name,
                     "type": p.ptype}
                    for p in c.params
                ],
            }
            for c in model.channels
        ],
        "regions": [
            {
                "id": r.id,
                "initial": r.initial,
                "states": sorted(r.states),
                "transitions": [
                    [t.source, t.caller, t.channel, t.callee, t.target]
                    for t in r.transitions
                ],
            }
            for r in model.regions
        ],
    }


def model_from_dict(model_dict: Dict[str, Any]) -> SystemModel:
    """Inverse of `model_to_dict`."""
    if not isinstance(model_dict, dict):
        raise TypeError(f"Expected type dict but got {type(model_dict)}.")
    try:
        return SystemModel(
            name=model_dict["system"],
            agents=tuple(
                Agent(a["kind"], a["id"], a.get("display"))
                for a in model_dict.get("agents", [])
            ),
            channels=tuple(
                ChannelSignature(
                    c["name"],
                    tuple(
                        Parameter(p["direction"], p["name"], p["type"])
                        for p in c.get("params", [])
                    ),
                )
                for c in model_dict.get("channels", [])
            ),
            regions=tuple(
                Region(
                    id=r["id"],
                    states=frozenset(r["states"]),
                    initial=r["initial"],
                    transitions=tuple(
                        Transition(src, Interaction(caller, ch, callee), dst)
                        for src, caller, ch, callee, dst in r["transitions"]
                    ),
                )
                for r in model_dict.get("regions", [])
            ),
        )
    except KeyError as error:
        raise ValueError(f"Missing key {error} in model dictionary.")


class ITGReader:
    """Read `.itg` model files.

    Parameters
    ----------
    itg_file : Union[str, os.PathLike, None]
        Path to the `.itg` file. Exactly one of `itg_file` and `itg_str`
        must be given.
    itg_str : Union[str, None]
        The model text.

    Attributes
    ----------
    itg_str : str
        The model text.

    Examples
    --------
    >>> from itgpy.dsl import ITGReader
    >>> reader = ITGReader(itg_file="vm.itg")
    >>> vm = reader.get_model()
    >>> reader.write_json("vm.json")
    """
    def __init__(
        self,
        itg_file: Union[str, os.PathLike, None] = None,
        itg_str: Union[str, None] = None,
    ):
        if (itg_file is None) == (itg_str is None):
            raise ValueError("Provide exactly one of itg_file or itg_str.")
        if itg_file is not None:
            if not isinstance(itg_file, (str, os.PathLike)):
                raise TypeError(
                    "Expected type str or os.PathLike but got "
                    f"{type(itg_file)}."
                )
            with open(itg_file, encoding="utf-8") as file:
                itg_str = file.read()
        elif not isinstance(itg_str, str):
            raise TypeError(f"Expected type str but got {type(itg_str)}.")
        self.itg_str = itg_str
        self._parsed = None

    def _parse(self) -> Union[SystemModel, List[ParseDiagnostic]]:
        if self._parsed is None:
            self._parsed = parse(self.itg_str)
        return self._parsed

    def get_diagnostics(self) -> List[ParseDiagnostic]:
        """Parse diagnostics; empty when the text parses."""
        parsed = self._parse()
        return [] if isinstance(parsed, SystemModel) else list(parsed)

    def get_model(self) -> SystemModel:
        """Get the parsed model.

        Raises
        ------
        ITGParseError
            If the text does not parse.
        """
        parsed = self._parse()
        if not isinstance(parsed, SystemModel):
            raise ITGParseError(parsed)
        return parsed

    def write_json(self, json_file: Union[str, os.PathLike]) -> None:
        """Write the parsed model as JSON."""
        if not isinstance(json_file, (str, os.PathLike)):
            raise TypeError(
                f"Expected type str or os.PathLike but got {type(json_file)}."
            )
        with open(json_file, "w", encoding="utf-8") as f:
            json.dump(model_to_dict(self.get_model()), f, indent=1)


class ITGWriter:
    """Write `SystemModel` objects as canonical `.itg` text.

    Models that do not validate are still written, with a warning: the
    printed text may not re-parse to an equal model.

    Examples
    --------
    >>> from itgpy.dsl import ITGWriter
    >>> from itgpy.example_models import vending_machine
    >>> ITGWriter(vending_machine.load_model()).write_itg("vm.itg")
    """
    def __init__(self, model: SystemModel):
        if not isinstance(model, SystemModel):
            raise TypeError(
                f"Expected type SystemModel but got {type(model)}."
            )
        self._model = model

    def get_itg(self) -> str:
        diagnostics = validate(self._model)
        if diagnostics:
            warnings.warn(
                f"Model '{self._model.name}' has {len(diagnostics)} "
                f"validation error(s), first: {diagnostics[0].rule}. The "
                "written text may not round-trip.",
                stacklevel=2,
            )
        return print_model(self._model)

    def write_itg(self, itg_file: Union[str, os.PathLike]) -> None:
        """Write the canonical text to `itg_file`."""
        text = self.get_itg()
        with open(itg_file, "w", encoding="utf-8") as file:
            file.write(text)
        logger.debug("wrote %s", itg_file)
