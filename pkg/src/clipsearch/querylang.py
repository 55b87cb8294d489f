"""Search-bar query language: free text, modality prefixes, temporal stages.

Syntax (EBNF in docs/query-language.md):

    query   = stage , { separator , stage } ;
    stage   = token , { token } ;
    token   = prefix , term | term ;
    prefix  = "-" , letter ;           letter in c o e t m a
    term    = word | quoted phrase ;
    separator = "<" | ">" ;

``<`` reads left to right: the left stage must occur earlier in the
video. ``>`` is the mirror separator: ``a > b`` is the same query as
``b < a``. A ``-x`` prefix binds exactly the next word or quoted phrase
as a filter of that modality; all unbound words join (space-separated)
into the stage's free text. Quoting preserves spaces.

All parse failures raise a QueryParseError subclass carrying the 0-based
character offset of the offending input, so the UI can highlight it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DanglingPrefix, EmptyStage, UnbalancedQuote, UnknownPrefix
from .model import Modality


@dataclass(frozen=True)
class Stage:
    free_text: str | None = None
    filters: tuple[tuple[Modality, str], ...] = ()

    def __post_init__(self):
        if not self.free_text and not self.filters:
            raise ValueError("a stage needs free text or at least one filter")


@dataclass(frozen=True)
class QueryAst:
    stages: tuple[Stage, ...]
    target_indexes: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.stages:
            raise ValueError("a query needs at least one stage")

    @property
    def is_temporal(self) -> bool:
        return len(self.stages) > 1


@dataclass
class _Token:
    text: str
    offset: int
    quoted: bool = False


@dataclass
class _Separator:
    char: str
    offset: int


def _scan(text: str) -> list[object]:
    """Split into word tokens and <>-separators, honoring double quotes.

    Separators bind without surrounding whitespace; quotes glue spaces
    into a single token and suppress separator meaning.
    """
    items: list[object] = []
    current: list[str] = []
    start = -1
    quoted = False
    in_quote = False
    quote_offset = -1

    def flush():
        nonlocal current, start, quoted
        if current:
            items.append(_Token("".join(current), start, quoted))
        current = []
        start = -1
        quoted = False

    for i, ch in enumerate(text):
        if in_quote:
            if ch == '"':
                in_quote = False
            else:
                current.append(ch)
            continue
        if ch == '"':
            in_quote = True
            quote_offset = i
            if start < 0:
                start = i
            quoted = True
            continue
        if ch.isspace():
            flush()
            continue
        if ch in "<>":
            flush()
            items.append(_Separator(ch, i))
            continue
        if start < 0:
            start = i
        current.append(ch)
    if in_quote:
        raise UnbalancedQuote("unterminated quoted phrase", quote_offset)
    flush()
    return items


def _is_prefix_shaped(tok: _Token) -> bool:
    return not tok.quoted and len(tok.text) > 1 and tok.text.startswith("-")


def _parse_stage(tokens: list[_Token]) -> Stage:
    free_parts: list[str] = []
    filters: list[tuple[Modality, str]] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if _is_prefix_shaped(tok):
            letter = tok.text[1:]
            if len(letter) != 1:
                raise UnknownPrefix(f"unknown search prefix {tok.text!r}", tok.offset)
            try:
                modality = Modality.from_prefix(letter)
            except KeyError:
                raise UnknownPrefix(
                    f"unknown search prefix {tok.text!r}", tok.offset
                ) from None
            if i + 1 >= len(tokens) or _is_prefix_shaped(tokens[i + 1]):
                raise DanglingPrefix(
                    f"prefix {tok.text!r} is not followed by a term", tok.offset
                )
            filters.append((modality, tokens[i + 1].text))
            i += 2
        else:
            free_parts.append(tok.text)
            i += 1
    return Stage(
        free_text=" ".join(free_parts) if free_parts else None,
        filters=tuple(filters),
    )


def _stage_order(sep_chars: list[str]) -> list[int]:
    """Temporal position of each raw stage.

    ``<`` places the right operand just after the left one; ``>`` places
    it just before. Applied left to right this keeps every adjacent pair
    consistent with its separator, and a pure ``>`` chain reads as the
    full reverse of the written order. (The mirror rule lives entirely in
    this function.)
    """
    order = [0]
    prev_pos = 0
    for i, ch in enumerate(sep_chars):
        stage_idx = i + 1
        if ch == "<":
            order.insert(prev_pos + 1, stage_idx)
            prev_pos = prev_pos + 1
        else:
            order.insert(prev_pos, stage_idx)
            # inserted before the previous operand, so it takes prev_pos
    return order


def parse(text: str) -> QueryAst:
    items = _scan(text)
    raw_stages: list[list[_Token]] = [[]]
    seps: list[_Separator] = []
    for item in items:
        if isinstance(item, _Separator):
            seps.append(item)
            raw_stages.append([])
        else:
            raw_stages[-1].append(item)
    for i, toks in enumerate(raw_stages):
        if not toks:
            if seps:
                offset = seps[i].offset if i < len(seps) else seps[-1].offset
            else:
                offset = 0
            raise EmptyStage("stage has no terms", offset)
    parsed = [_parse_stage(toks) for toks in raw_stages]
    order = _stage_order([s.char for s in seps])
    return QueryAst(stages=tuple(parsed[i] for i in order))


def _render_term(term: str) -> str:
    return f'"{term}"' if (" " in term or not term) else term


def render(ast: QueryAst) -> str:
    """Canonical string form: stages joined with ``<``, free text first,
    filter terms quoted when they contain spaces. parse(render(ast))
    round-trips for ASTs whose tokens are plain words."""
    parts = []
    for stage in ast.stages:
        bits = []
        if stage.free_text:
            bits.append(stage.free_text)
        for modality, term in stage.filters:
            bits.append(f"-{modality.prefix} {_render_term(term)}")
        parts.append(" ".join(bits))
    return " < ".join(parts)
