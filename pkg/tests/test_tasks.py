import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ska_recall.errors import ParseError, RangeExhausted, TieUnresolvable
from ska_recall.tasks import (FAMILIES, VOCAB, Action, Episode, dumps, encode_economy,
                              gen_commonword, gen_economy, gen_mqar, gen_multihop, gen_niah,
                              gen_sysprompt, gen_tooltrace, generate, oracle_agrees,
                              parse_economy, read_jsonl, replay, write_jsonl)
from ska_recall.tasks.vocab import ARROW, COLON, COT, EQ, QUERY, SEP, SYS

seeds = st.integers(0, 2**31 - 1)


def test_vocab_ranges_disjoint():
    ranges = [VOCAB.digits, VOCAB.agents, VOCAB.keys, VOCAB.values, VOCAB.distractors]
    ids = [t for r in ranges for t in r]
    assert len(ids) == len(set(ids)) and max(ids) < VOCAB.size
    assert min(ids) > SYS
    assert VOCAB.number(7) == [VOCAB.digit(0), VOCAB.digit(7)]
    with pytest.raises(ValueError):
        VOCAB.number(100)


@pytest.mark.parametrize("family", FAMILIES)
def test_deterministic_bytes(family):
    a = [dumps(generate(family, s, tier="hard")) for s in range(5)]
    b = [dumps(generate(family, s, tier="hard")) for s in range(5)]
    assert a == b
    assert len(set(a)) == 5


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("tier", ["easy", "hard"])
def test_oracle_closure(family, tier):
    for s in range(40):
        ep = generate(family, s, tier=tier)
        ep.validate()
        assert oracle_agrees(ep), (family, s)


class TestMqar:
    def test_single_pair(self):
        ep = gen_mqar(1, 0, 0)
        k, v = ep.tokens[0], ep.tokens[1]
        assert ep.tokens == [k, v, QUERY, k]
        assert ep.queries[0].answer_tokens == (v,) and ep.queries[0].position == 3
        assert ep.mask == [1, 1, 0, 0]

    def test_binding_table(self):
        ep = gen_mqar(4, 64, 7)
        table = dict(zip(ep.tokens[0:8:2], ep.tokens[1:8:2]))
        for q in ep.queries:
            assert q.answer_tokens == (table[ep.tokens[q.position]],)
        assert sorted(ep.tokens[q.position] for q in ep.queries) == sorted(table)

    @pytest.mark.parametrize("kv,gap", [(32, 4096), (4, 64), (16, 512)])
    def test_length_formula(self, kv, gap):
        ep = gen_mqar(kv, gap, 1)
        assert len(ep) == 2 * kv + gap + 2 * kv
        assert sum(ep.mask) == 2 * kv
        assert all(t in VOCAB.distractors for t in ep.tokens[2 * kv:2 * kv + gap])

    def test_key_range_exhausted(self):
        with pytest.raises(RangeExhausted):
            gen_mqar(len(VOCAB.keys) + 1, 4, 0)


class TestEconomy:
    def test_single_mine(self):
        ep = encode_economy([Action("mine", 0, (("g", 2),))], 1, [(0, "g")])
        assert ep.queries[0].answer_tokens == tuple(VOCAB.number(12))
        assert oracle_agrees(ep)

    def test_trade_conserves_wood(self):
        ep = encode_economy([Action("trade", 1, (("w", 1),), 0)], 2, [(0, "w"), (1, "w")])
        hist, _ = parse_economy(ep.tokens)
        before, after = hist[0][1], hist[1][1]
        assert sum(a["w"] for a in before.values()) == sum(a["w"] for a in after.values())
        assert [q.answer_tokens for q in ep.queries] == [tuple(VOCAB.number(11)),
                                                         tuple(VOCAB.number(9))]

    def test_illegal_action_rejected(self):
        with pytest.raises(ValueError):
            encode_economy([Action("build", 0, (("g", 11),))], 1, [(0, "g")])

    def test_mining_clamps(self):
        acts = [Action("mine", 0, (("g", 3),))] * 40
        ep = encode_economy(acts, 1, [(0, "g")])
        assert ep.queries[0].answer_tokens == tuple(VOCAB.number(99))
        assert oracle_agrees(ep)

    def test_hard_seed3_replay(self):
        ep = gen_economy("hard", 3)
        assert 40 <= ep.params["n_steps"] <= 100 and ep.params["n_agents"] == 6
        assert 200 <= ep.params["gap"] <= 400
        assert replay("economy", ep.tokens) == [(q.position, q.answer_tokens) for q in ep.queries]

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.sampled_from(["easy", "hard"]))
    def test_conservation_and_bounds(self, seed, tier):
        ep = gen_economy(tier, seed)
        hist, _ = parse_economy(ep.tokens)
        for prev, (kind, cur) in zip(hist, hist[1:]):
            for res in ("g", "w"):
                assert all(0 <= a[res] <= 99 for a in cur.values())
                if kind == "trade":
                    assert sum(a[res] for a in cur.values()) == sum(a[res] for a in prev[1].values())

    def test_mask_excludes_gap(self):
        ep = gen_economy("hard", 5)
        gap = ep.params["gap"]
        log_end = ep.tokens.index(QUERY) - gap
        assert not any(ep.mask[log_end:])
        start = log_end
        assert all(ep.mask[:start])


class TestToolTrace:
    def _ep(self, calls, ask):
        a, t = ask
        toks = []
        for agent, tool, res in calls:
            toks += [agent, COLON, tool, ARROW, res, SEP]
        toks += [QUERY, a, COLON, t, EQ]
        return toks

    def test_single_call(self):
        a, t = VOCAB.agent(0), VOCAB.keys[0]
        toks = self._ep([(a, t, VOCAB.values[5])], (a, t))
        assert replay("tooltrace", toks) == [(len(toks) - 1, (VOCAB.values[5],))]

    def test_last_write_wins(self):
        a, t = VOCAB.agent(0), VOCAB.keys[0]
        toks = self._ep([(a, t, VOCAB.values[5]), (a, t, VOCAB.values[9])], (a, t))
        assert replay("tooltrace", toks)[0][1] == (VOCAB.values[9],)

    @pytest.mark.parametrize("tier,lo,hi,cap", [("easy", 10, 30, 400), ("hard", 60, 120, 1500)])
    def test_tiers(self, tier, lo, hi, cap):
        for s in range(20):
            ep = gen_tooltrace(tier, s)
            assert lo <= ep.params["n_calls"] <= hi and len(ep) <= cap


class TestSysprompt:
    def test_direct_echo(self):
        ep = gen_sysprompt("cot", "easy", 0, n_vars=1, gap=0)
        _, name, _, val = ep.tokens[:4]
        assert ep.tokens == [SYS, name, EQ, val, QUERY, name, EQ]
        assert ep.queries[0].answer_tokens == (val,)

    def test_specific_decoys_ignored(self):
        for s in range(30):
            ep = gen_sysprompt("specific", "hard", s)
            assert COT in ep.tokens
            names = ep.tokens[1:24:4]
            decoys = [i for i in range(len(ep.tokens) - 1)
                      if ep.tokens[i] == COT and ep.tokens[i + 1] in names]
            assert decoys
            assert oracle_agrees(ep)

    def test_hard_gap_range(self):
        for s in range(20):
            ep = gen_sysprompt("cot", "hard", s)
            assert ep.params["n_vars"] == 4 and 150 <= ep.params["gap"] <= 300


class TestNiahAndCommonword:
    def test_needle_at_start(self):
        ep = gen_niah(1, 64, 0, needle_positions=[0])
        assert len(ep) == 64
        assert ep.queries[0].answer_tokens == (ep.tokens[1],)
        assert ep.mask[:2] == [1, 1] and sum(ep.mask) == 2

    def test_eight_needles(self):
        ep = gen_niah(8, 2048, 11, n_queries=8)
        assert len(ep) == 2048 and oracle_agrees(ep)

    def test_forced_mode(self):
        x = list(VOCAB.distractors)
        toks = [x[0]] * 5 + [x[1]] * 3 + [x[2]] * 3 + [QUERY, EQ]
        assert replay("commonword", toks)[0][1] == (x[0],)

    def test_unique_mode(self):
        for s in range(30):
            ep = gen_commonword(200, s)
            counts = np.bincount(ep.tokens[:-2])
            assert np.count_nonzero(counts == counts.max()) == 1

    def test_tie_unresolvable(self, monkeypatch):
        import ska_recall.tasks.generators as g
        monkeypatch.setattr(g, "_fill", lambda rng, seq, n: [list(seq)[i % 2] for i in range(n)])
        with pytest.raises(TieUnresolvable):
            g.gen_commonword(6, 0)

    def test_multihop_chain(self):
        ep = gen_multihop(3, 10, 2)
        assert oracle_agrees(ep)


class TestJsonl:
    def test_round_trip(self):
        eps = [generate(f, s, tier="easy") for f in FAMILIES for s in range(3)]
        buf = io.StringIO()
        assert write_jsonl(eps, buf) == len(eps)
        text = buf.getvalue()
        assert all(line == line.rstrip() for line in text.splitlines())
        back = list(read_jsonl(io.StringIO(text)))
        assert [dumps(e) for e in back] == [dumps(e) for e in eps]
        rec = json.loads(text.splitlines()[0])
        assert {"family", "tier", "seed", "tokens", "mask", "queries"} <= set(rec)

    def test_parse_error_line(self):
        good = dumps(gen_mqar(2, 4, 0))
        bad = json.loads(good)
        bad["mask"] = bad["mask"][:-1]
        with pytest.raises(ParseError) as exc:
            list(read_jsonl(io.StringIO(good + "\n" + json.dumps(bad) + "\n")))
        assert exc.value.lineno == 2
        with pytest.raises(ParseError):
            list(read_jsonl(io.StringIO("{not json\n")))

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            Episode("nope", None, 0, [1], [0], []).validate()
