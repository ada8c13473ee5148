import random

import pytest

from conftest import GRAMMARS, Q, R, S, mixed_grammar, unary_grammar
from depsem.funql import (AmbiguousSymbolError, EmptyCorpusError,
                          FunqlSyntaxError, FunqlTypeError,
                          MeaningRepresentation, MRNode, SemanticGrammar,
                          SemanticType, SemanticUnit, SignatureTable,
                          UnknownSymbolError, build_grammar, enumerate_mrs,
                          load_signatures, mr, parse_mr, sample_mr,
                          serialize_mr)


def river_table():
    table = SignatureTable()
    QUERY, RIVER, STATE, REF = (SemanticType(n) for n in
                                ("QUERY", "RIVER", "STATE", "REF"))
    table.add("answer", QUERY, (RIVER,))
    table.add("river(all)", RIVER)
    table.add("exclude", RIVER, (RIVER, RIVER))
    table.add("traverse", RIVER, (STATE,))
    table.add("stateid", STATE, (REF,))
    return table


class TestUnits:
    def test_label_formats(self):
        u = SemanticUnit(R, "traverse", (S,))
        assert u.label() == "R:traverse(S)"
        assert SemanticUnit(S, "tn").label() == "S:tn"
        two = SemanticUnit(S, "exclude", (S, S))
        assert two.label() == "S:exclude(S,S)"
        assert two.arity == 2

    def test_uid_ignored_for_equality(self):
        a = SemanticUnit(S, "tn", uid=3)
        b = SemanticUnit(S, "tn", uid=7)
        assert a == b and hash(a) == hash(b)

    def test_at_most_two_arguments(self):
        with pytest.raises(ValueError):
            SemanticUnit(S, "f", (S, S, S))

    def test_node_type_checking(self):
        ans = SemanticUnit(Q, "ans", (S,))
        with pytest.raises(FunqlTypeError):
            MRNode(ans)  # missing child
        with pytest.raises(FunqlTypeError):
            MRNode(ans, (MRNode(SemanticUnit(R, "river")),))  # wrong type


class TestParse:
    def test_nested_query_roundtrip(self):
        table = river_table()
        text = "answer(exclude(river(all), traverse(stateid('tn'))))"
        m = parse_mr(text, table)
        assert serialize_mr(m) == text
        assert m.size == 6
        assert m.depth == 5
        functions = [u.function for u in m.units()]
        assert functions == ["answer", "exclude", "river(all)", "traverse",
                             "stateid", "'tn'"]

    def test_literal_gets_slot_type(self):
        m = parse_mr("answer(traverse(stateid('tn')))", river_table())
        leaf = m.nodes()[-1].unit
        assert leaf.function == "'tn'"
        assert leaf.return_type == SemanticType("REF")
        assert leaf.arity == 0

    def test_unknown_symbol(self):
        with pytest.raises(UnknownSymbolError):
            parse_mr("answer(bogus(river(all)))", river_table())

    def test_syntax_errors(self):
        table = river_table()
        for bad in ["", "answer(", "answer)x(", "answer(river(all)"]:
            with pytest.raises(FunqlSyntaxError):
                parse_mr(bad, table)
        with pytest.raises(FunqlSyntaxError):
            parse_mr("answer(river(all)) trailing", table)

    def test_arity_mismatch_is_type_error(self):
        with pytest.raises(FunqlTypeError):
            parse_mr("answer(exclude(river(all)))", river_table())

    def test_overloading_resolved_by_context(self):
        table = river_table()
        STATE = SemanticType("STATE")
        table.add("answer", SemanticType("QUERY"), (STATE,))
        table.add("biggest", STATE, (STATE,))
        m = parse_mr("answer(biggest(stateid('tn')))", table)
        assert m.root.unit.arg_types == (STATE,)

    def test_true_ambiguity_raises(self):
        table = SignatureTable()
        A, B = SemanticType("A"), SemanticType("B")
        table.add("top", Q, (A,))
        table.add("top", Q, (B,))
        table.add("leaf", A)
        table.add("leaf", B)
        with pytest.raises(AmbiguousSymbolError):
            parse_mr("top(leaf)", table)

    def test_serialize_two_arguments(self):
        m = parse_mr("exclude(river(all), river(all))", river_table())
        assert serialize_mr(m) == "exclude(river(all), river(all))"


class TestSignatureFile:
    def test_load(self, tmp_path):
        path = tmp_path / "sigs.tsv"
        path.write_text("# comment\n"
                        "answer\tQUERY\tSTATE\n"
                        "state(all)\tSTATE\t-\n"
                        "stateid\tSTATE\tREF\n"
                        "exclude\tSTATE\tSTATE,STATE\n"
                        "\n")
        table = load_signatures(path)
        assert table.symbols() == ["answer", "exclude", "state(all)",
                                   "stateid"]
        assert table.signatures("state(all)") == [(SemanticType("STATE"), ())]
        (ret, args), = table.signatures("exclude")
        assert args == (SemanticType("STATE"), SemanticType("STATE"))

    def test_bad_line(self, tmp_path):
        path = tmp_path / "sigs.tsv"
        path.write_text("answer\n")
        with pytest.raises(FunqlSyntaxError):
            load_signatures(path)


class TestGrammar:
    def test_dense_sorted_uids(self):
        g = mixed_grammar()
        assert [u.uid for u in g.units] == list(range(len(g)))
        assert [u.signature() for u in g.units] == \
            sorted(u.signature() for u in g.units)

    def test_canonical_and_uid(self):
        g = unary_grammar()
        loose = SemanticUnit(S, "tn")
        assert g.canonical(loose).uid is not None
        assert g.uid(loose) == g.canonical(loose).uid
        with pytest.raises(UnknownSymbolError):
            g.canonical(SemanticUnit(S, "nope"))

    def test_allowed_children_by_type(self):
        g = mixed_grammar()
        pair = g.canonical(SemanticUnit(S, "pair", (R, S)))
        first = g.allowed_children(pair, 0)
        second = g.allowed_children(pair, 1)
        assert all(u.return_type == R for u in first)
        assert {u.function for u in second} == {"pair", "tn"}
        with pytest.raises(IndexError):
            g.allowed_children(pair, 2)

    def test_build_grammar_dedupes(self):
        ans = SemanticUnit(Q, "ans", (S,))
        tn = SemanticUnit(S, "tn")
        corpus = [mr(ans, mr(tn)), mr(ans, mr(tn))]
        g = build_grammar(corpus, Q)
        assert len(g) == 2
        with pytest.raises(EmptyCorpusError):
            build_grammar([], Q)


class TestEnumeration:
    def test_unary_counts(self):
        g = unary_grammar()
        # ans(tn) is the only tree of depth 2; depth 1 has no Q-typed leaf
        assert len(enumerate_mrs(g, 1)) == 0
        assert len(enumerate_mrs(g, 2)) == 1

    def test_ambiguous_counts(self):
        g = GRAMMARS["ambiguous"]()
        # depth 2: ans(tn), ans(ca); depth 3 adds ans(wrap(tn)), ans(wrap(ca))
        assert len(enumerate_mrs(g, 2)) == 2
        assert len(enumerate_mrs(g, 3)) == 4
        assert len(enumerate_mrs(g, 4)) == 6

    def test_all_enumerated_mrs_type_check_and_respect_depth(self):
        g = GRAMMARS["mixed"]()
        for m in enumerate_mrs(g, 4):
            assert isinstance(m, MeaningRepresentation)
            assert m.depth <= 4

    def test_sample_within_cap(self):
        g = GRAMMARS["ambiguous"]()
        rng = random.Random(0)
        seen = set()
        for _ in range(50):
            m = sample_mr(g, rng, 4)
            assert m.depth <= 4
            seen.add(serialize_mr(m))
        assert len(seen) > 1
