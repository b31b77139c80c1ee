import itertools

import pytest

from immlab.program import (
    MODES,
    BinOp,
    Cas,
    Fadd,
    Lit,
    Load,
    ParseError,
    Reg,
    Store,
    UnboundRegister,
    eval_expr,
    mode_leq,
    parse_litmus,
    print_litmus,
)

MP = """
prog "MP"
locations x y
vals 0..2
thread 0:
  w[rlx] x 1
  w[rel] y 1
thread 1:
  r[acq] a y
  r[rlx] b x
assert forbidden: a=1 /\\ b=0
expect imm=forbidden power=forbidden arm=forbidden
"""


class TestModeOrder:
    def test_rlx_below_sc(self):
        assert mode_leq("rlx", "sc")

    def test_acq_rel_incomparable(self):
        assert not mode_leq("acq", "rel")
        assert not mode_leq("rel", "acq")

    def test_reflexive(self):
        for m in MODES:
            assert mode_leq(m, m)

    def test_partial_order(self):
        for a, b in itertools.product(MODES, MODES):
            if mode_leq(a, b) and mode_leq(b, a):
                assert a == b
            for c in MODES:
                if mode_leq(a, b) and mode_leq(b, c):
                    assert mode_leq(a, c)

    def test_generators(self):
        assert mode_leq("rlx", "acq")
        assert mode_leq("rlx", "rel")
        assert mode_leq("acq", "acqrel")
        assert mode_leq("rel", "acqrel")
        assert mode_leq("acqrel", "sc")
        assert not mode_leq("sc", "rlx")


class TestParse:
    def test_mp(self):
        t = parse_litmus(MP.encode())
        assert t.name == "MP"
        assert len(t.program.threads) == 2
        assert all(len(body) == 2 for body in t.program.threads)
        assert isinstance(t.program.threads[0][0], Store)
        assert t.program.threads[0][1].mode == "rel"
        assert isinstance(t.program.threads[1][0], Load)
        assert t.assertion == [("a", 1), ("b", 0)]
        assert t.assertion_kind == "forbidden"
        assert t.expectations["imm"] == "forbidden"

    def test_empty_thread_body(self):
        t = parse_litmus('prog "E"\nlocations x\nthread 0:\nthread 1:\n  w[rlx] x 1\n')
        assert t.program.threads[0] == []
        assert len(t.program.threads[1]) == 1

    def test_goto_out_of_range(self):
        src = 'prog "G"\nlocations x\nthread 0:\n  r[rlx] a x\n  if a != 0 goto 99\n  w[rlx] x 1\n'
        with pytest.raises(ParseError, match="goto out of range"):
            parse_litmus(src)

    def test_goto_one_past_end_ok(self):
        src = 'prog "G"\nlocations x\nthread 0:\n  r[rlx] a x\n  if a != 0 goto 2\n'
        t = parse_litmus(src)
        assert t.program.threads[0][1].target == 2

    def test_rmw_mnemonics(self):
        src = (
            'prog "RMW"\nlocations x\nvals 0..2\nthread 0:\n'
            "  fadd[rlx,rel,strong] a x 1\n"
            "  cas[acq,rlx] b x 0 2\n"
        )
        t = parse_litmus(src)
        fadd, cas = t.program.threads[0]
        assert isinstance(fadd, Fadd) and fadd.rmw_mode == "strong"
        assert fadd.write_mode == "rel"
        assert isinstance(cas, Cas) and cas.rmw_mode == "normal"

    def test_undeclared_register(self):
        src = 'prog "U"\nlocations x\nthread 0:\n  w[rlx] x q\n'
        with pytest.raises(ParseError, match="undeclared register or location"):
            parse_litmus(src)

    def test_undeclared_assertion_name(self):
        src = 'prog "U"\nlocations x\nthread 0:\n  w[rlx] x 1\nassert allowed: q=1\n'
        with pytest.raises(ParseError, match="undeclared register or location"):
            parse_litmus(src)

    def test_ambiguous_assertion_register(self):
        src = (
            'prog "A"\nlocations x\nthread 0:\n  r[rlx] a x\n'
            "thread 1:\n  r[rlx] a x\nassert allowed: a=0\n"
        )
        with pytest.raises(ParseError, match="ambiguous"):
            parse_litmus(src)

    def test_location_arithmetic(self):
        src = 'prog "L"\nlocations x y\nthread 0:\n  r[rlx] a x\n  r[rlx] b y + a\n'
        t = parse_litmus(src)
        load = t.program.threads[0][1]
        assert isinstance(load.loc, BinOp)
        assert load.loc.left == Lit(1)  # y is the second declared location

    def test_bad_mode(self):
        with pytest.raises(ParseError, match="bad write mode"):
            parse_litmus('prog "B"\nlocations x\nthread 0:\n  w[acq] x 1\n')

    def test_thread_ids_contiguous(self):
        with pytest.raises(ParseError, match="contiguous"):
            parse_litmus('prog "T"\nlocations x\nthread 1:\n  w[rlx] x 1\n')


class TestRoundTrip:
    def test_corpus_round_trip(self, corpus):
        for name, test in corpus.items():
            printed = print_litmus(test)
            again = parse_litmus(printed, name)
            assert [list(map(str, b)) for b in again.program.threads] == [
                list(map(str, b)) for b in test.program.threads
            ], name
            assert again.assertion == test.assertion
            assert again.expectations == test.expectations
            assert again.program.locations == test.program.locations
            assert again.program.max_val == test.program.max_val


class TestEval:
    def test_addition(self):
        assert eval_expr(BinOp("+", Reg("a"), Lit(1)), {"a": 1}) == 2

    def test_literal(self):
        assert eval_expr(Lit(5), {}) == 5

    def test_saturating_subtraction(self):
        # naturals: enumeration never produces negatives, so b-3 at b=1 is 0
        assert eval_expr(BinOp("-", Reg("b"), Lit(3)), {"b": 1}) == 0

    def test_comparisons(self):
        assert eval_expr(BinOp("!=", Lit(1), Lit(0)), {}) == 1
        assert eval_expr(BinOp("==", Lit(1), Lit(0)), {}) == 0

    def test_unbound_register(self):
        with pytest.raises(UnboundRegister):
            eval_expr(Reg("nope"), {})


class TestCandidateValues:
    def test_literals_and_zero(self, corpus):
        vals = corpus["mp"].program.candidate_values()
        assert vals == (0, 1)

    def test_fadd_closure(self, corpus):
        vals = corpus["strong-rmw"].program.candidate_values()
        assert vals == (0, 1, 2)  # 0, literal 1, fadd closure 0+1, 1+1 ≤ max

    def test_relaxed_only(self, corpus):
        assert corpus["lb-data"].program.is_relaxed_only()
        assert not corpus["mp"].program.is_relaxed_only()
        assert not corpus["atomicity"].program.is_relaxed_only()
