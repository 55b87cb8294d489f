from __future__ import annotations

import random

import pytest

from clipsearch.errors import (
    DanglingPrefix,
    EmptyStage,
    QueryParseError,
    UnbalancedQuote,
    UnknownPrefix,
)
from clipsearch.model import Modality
from clipsearch.querylang import QueryAst, Stage, parse, render


class TestParseBasics:
    def test_plain_free_text(self):
        ast = parse("beach wedding")
        assert ast == QueryAst(stages=(Stage(free_text="beach wedding"),))

    def test_two_stage_with_filter(self):
        ast = parse("bride on beach -o person < people dancing")
        assert ast.stages == (
            Stage(free_text="bride on beach", filters=((Modality.OBJECT, "person"),)),
            Stage(free_text="people dancing"),
        )

    def test_mirror_separator_orders_stages(self):
        ast = parse("people dancing > bride on beach")
        assert ast.stages == (
            Stage(free_text="bride on beach"),
            Stage(free_text="people dancing"),
        )

    def test_mirror_equals_less_than_form(self):
        assert parse("people dancing > bride on beach -o person") == parse(
            "bride on beach -o person < people dancing"
        )

    def test_quoted_phrase_filter(self):
        ast = parse('-t "happy birthday"')
        assert ast.stages == (Stage(filters=((Modality.TEXT, "happy birthday"),)),)

    def test_all_prefixes(self):
        ast = parse("-c sunset -o dog -e dancing -t menu -m forceps -a cutting")
        assert ast.stages[0].filters == (
            (Modality.CONCEPT, "sunset"),
            (Modality.OBJECT, "dog"),
            (Modality.EVENT, "dancing"),
            (Modality.TEXT, "menu"),
            (Modality.MED_OBJECT, "forceps"),
            (Modality.MED_ACTION, "cutting"),
        )

    def test_separator_without_spaces(self):
        ast = parse("a<b")
        assert ast.stages == (Stage(free_text="a"), Stage(free_text="b"))

    def test_mixed_text_and_filters(self):
        ast = parse("dog playing -o dog in garden")
        assert ast.stages[0].free_text == "dog playing in garden"
        assert ast.stages[0].filters == ((Modality.OBJECT, "dog"),)

    def test_three_stage_reverse_chain(self):
        # pure > chain reads right-to-left
        ast = parse("a > b > c")
        assert tuple(s.free_text for s in ast.stages) == ("c", "b", "a")

    def test_quoted_free_text_keeps_spaces(self):
        ast = parse('"san  francisco" bay')
        assert ast.stages[0].free_text == "san  francisco bay"


class TestParseErrors:
    def test_empty_stage_between_separators(self):
        with pytest.raises(EmptyStage) as exc:
            parse("a < < b")
        assert exc.value.offset == 4  # the second <

    def test_empty_input(self):
        with pytest.raises(EmptyStage) as exc:
            parse("   ")
        assert exc.value.offset == 0

    def test_leading_separator(self):
        with pytest.raises(EmptyStage) as exc:
            parse("< a")
        assert exc.value.offset == 0

    def test_trailing_separator(self):
        with pytest.raises(EmptyStage) as exc:
            parse("a <")
        assert exc.value.offset == 2

    def test_unknown_prefix(self):
        with pytest.raises(UnknownPrefix) as exc:
            parse("dog -z cat")
        assert exc.value.offset == 4

    def test_long_prefix_rejected(self):
        with pytest.raises(UnknownPrefix):
            parse("-object dog")

    def test_dangling_prefix_at_end(self):
        with pytest.raises(DanglingPrefix) as exc:
            parse("beach -o")
        assert exc.value.offset == 6

    def test_dangling_prefix_before_separator(self):
        with pytest.raises(DanglingPrefix):
            parse("beach -o < dancing")

    def test_prefix_bound_to_prefix_rejected(self):
        with pytest.raises(DanglingPrefix):
            parse("-o -c dog")

    def test_unbalanced_quote(self):
        with pytest.raises(UnbalancedQuote) as exc:
            parse('-t "happy birthday')
        assert exc.value.offset == 3

    def test_every_error_carries_offset(self):
        for bad in ("a < < b", "  ", "-z x", "x -o", '-t "oops'):
            with pytest.raises(QueryParseError) as exc:
                parse(bad)
            assert isinstance(exc.value.offset, int)
            assert 0 <= exc.value.offset <= len(bad)


class TestRender:
    def test_single_free_text(self):
        assert render(QueryAst(stages=(Stage(free_text="dog"),))) == "dog"

    def test_canonical_two_stage(self):
        ast = QueryAst(
            stages=(
                Stage(free_text="bride on beach", filters=((Modality.OBJECT, "person"),)),
                Stage(free_text="people dancing"),
            )
        )
        assert render(ast) == "bride on beach -o person < people dancing"

    def test_multiword_terms_quoted(self):
        ast = QueryAst(stages=(Stage(filters=((Modality.TEXT, "happy birthday"),)),))
        assert render(ast) == '-t "happy birthday"'


WORDS = [
    "beach", "dog", "wedding", "night", "bike", "snow", "market", "boat",
    "red", "guitar", "cat", "crowd", "sunset", "diver", "coral", "tool",
]


def random_ast(rnd: random.Random) -> QueryAst:
    modalities = list(Modality)
    stages = []
    for _ in range(rnd.randint(1, 4)):
        has_text = rnd.random() < 0.75
        n_filters = rnd.randint(0 if has_text else 1, 3)
        free_text = (
            " ".join(rnd.choice(WORDS) for _ in range(rnd.randint(1, 4)))
            if has_text
            else None
        )
        filters = tuple(
            (
                rnd.choice(modalities),
                " ".join(rnd.choice(WORDS) for _ in range(rnd.randint(1, 3))),
            )
            for _ in range(n_filters)
        )
        stages.append(Stage(free_text=free_text, filters=filters))
    return QueryAst(stages=tuple(stages))


class TestRoundTrip:
    def test_thousand_random_asts(self):
        rnd = random.Random(20240)
        for _ in range(1000):
            ast = random_ast(rnd)
            assert parse(render(ast)) == ast

    def test_stage_count_equals_separators_plus_one(self):
        rnd = random.Random(77)
        for _ in range(200):
            ast = random_ast(rnd)
            text = render(ast)
            seps = text.count("<") + text.count(">")
            assert len(parse(text).stages) == seps + 1

    def test_no_token_loss(self):
        rnd = random.Random(99)
        for _ in range(300):
            ast = random_ast(rnd)
            text = render(ast)
            parsed = parse(text)
            input_tokens = sorted(
                t for t in text.replace("<", " ").replace('"', " ").split()
                if not (t.startswith("-") and len(t) == 2)
            )
            output_tokens = []
            for stage in parsed.stages:
                if stage.free_text:
                    output_tokens.extend(stage.free_text.split())
                for _, term in stage.filters:
                    output_tokens.extend(term.split())
            assert sorted(output_tokens) == input_tokens


class TestTotality:
    def test_random_strings_parse_or_raise_defined_error(self):
        rnd = random.Random(4242)
        alphabet = 'abc -<>" xyz'
        for _ in range(2000):
            s = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(0, 24)))
            try:
                ast = parse(s)
            except (EmptyStage, UnknownPrefix, DanglingPrefix, UnbalancedQuote):
                continue
            assert isinstance(ast, QueryAst)
            assert len(ast.stages) >= 1
            for stage in ast.stages:
                assert stage.free_text or stage.filters
