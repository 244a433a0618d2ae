import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ska_recall.config import SkaConfig
from ska_recall.engine import (EmbeddingScheme, RecurrentState, decode, episode_features,
                               evaluate, make_scheme, memory_crossover, orthogonal_scheme,
                               run_parallel, run_recurrent, state_bytes)
from ska_recall.errors import EmptyDataset, KeyCapacityExceeded
from ska_recall.operator import estimate, retrieve_ska
from ska_recall.tasks import FAMILIES, VOCAB, gen_mqar, generate

CFG = SkaConfig(rank_r=32, head_dim_p=32, power_k=0)


@pytest.fixture(scope="module")
def ortho():
    return make_scheme("orthogonal", 32, 32)


class TestSchemes:
    def test_orthonormal_keys(self, ortho):
        k = ortho.key_table[list(VOCAB.keys)]
        np.testing.assert_allclose(k @ k.T, np.eye(32), atol=1e-15)
        assert not ortho.key_table[list(VOCAB.distractors)].any()
        assert ortho.query_table is ortho.key_table

    def test_value_tables_are_one_hot(self, ortho):
        for j, t in enumerate(ortho.value_tokens):
            assert ortho.value_table[t, j] == 1.0 and ortho.value_table[t].sum() == 1.0

    def test_capacity(self):
        with pytest.raises(KeyCapacityExceeded):
            make_scheme("orthogonal", 16, 32)
        with pytest.raises(ValueError):
            make_scheme("learned", 32, 32)

    def test_decode_tie_breaks_low(self, ortho):
        assert decode(np.zeros(32), ortho) == min(ortho.value_tokens)
        y = np.zeros(32)
        y[[3, 7]] = 1.0
        assert decode(y, ortho) == min(ortho.value_tokens[3], ortho.value_tokens[7])

    def test_previous_token_binding(self, ortho):
        ep = gen_mqar(2, 0, 0)
        z, v = episode_features(ep, ortho)
        assert not z[0].any()
        np.testing.assert_array_equal(z[1], ortho.key_table[ep.tokens[0]])
        np.testing.assert_array_equal(v[1], ortho.value_table[ep.tokens[1]])


class TestParallel:
    def test_single_pair(self, ortho):
        for s in range(10):
            res = run_parallel(gen_mqar(1, 0, s), ortho, CFG)
            assert res[0].correct
            np.testing.assert_allclose(res[0].outputs[0].max(), CFG.eta / (1 + CFG.ridge_eps),
                                       rtol=1e-12)

    @pytest.mark.parametrize("mode", ["prefix", "masked", "chunk-causal"])
    def test_long_gap(self, ortho, mode):
        for s in range(3):
            ep = gen_mqar(32, 4096, s)
            assert all(r.correct for r in run_parallel(ep, ortho, CFG, mode))

    def test_empty_chunk_context(self, ortho):
        s = next(s for s in range(100) if gen_mqar(1, 0, s).tokens[1] != min(ortho.value_tokens))
        res = run_parallel(gen_mqar(1, 0, s), ortho, CFG, "chunk-causal")
        assert not res[0].outputs.any()
        assert res[0].decoded == (min(ortho.value_tokens),) and not res[0].correct

    def test_chunk_equals_prefix_after_complete_chunks(self, ortho):
        # kv=16 facts fill exactly half a chunk; gap pads to a boundary
        from ska_recall.tasks import Episode, Query
        base = gen_mqar(16, 64 - 32, 3)
        toks = base.tokens[:64] + base.tokens[64:]
        ep = Episode("mqar", None, 3, toks, base.mask, [Query(65, base.queries[0].answer_tokens)],
                     base.params)
        ep.tokens[64] = 4  # QUERY marker at the chunk start
        ep.tokens[65] = base.tokens[base.queries[0].position]
        a = run_parallel(ep, ortho, CFG, "chunk-causal")
        b = run_parallel(ep, ortho, CFG, "prefix")
        assert a[0].decoded == b[0].decoded and a[0].correct

    def test_mask_ablation(self):
        keys = list(VOCAB.keys) + list(VOCAB.distractors)
        scheme = orthogonal_scheme(64, 32, key_tokens=keys)
        cfg = CFG.with_(rank_r=64)
        for s in range(5):
            ep = gen_mqar(8, 256, s)
            boundary = ep.prefill_boundary - 1
            trunc = type(ep)(ep.family, None, s, ep.tokens, [1] * boundary + [0] * (len(ep) - boundary),
                             ep.queries, ep.params)
            full = run_parallel(trunc, scheme, cfg, "masked")
            masked = run_parallel(ep, scheme, cfg, "masked")
            for a, b in zip(full, masked):
                np.testing.assert_allclose(a.outputs, b.outputs, atol=1e-12)
                assert a.decoded == b.decoded and a.correct

    def test_unknown_mode(self, ortho):
        with pytest.raises(ValueError):
            run_parallel(gen_mqar(1, 0, 0), ortho, CFG, "sideways")

    def test_fp32_path(self, ortho):
        res = run_parallel(gen_mqar(8, 64, 1), ortho, CFG, fp32=True)
        assert all(r.correct for r in res)


class TestRecurrent:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_matches_parallel(self, family):
        cfg = SkaConfig(rank_r=32, head_dim_p=32)
        for kind in ("orthogonal", "random-gaussian"):
            scheme = make_scheme(kind, 32, 32)
            for s in range(3):
                ep = generate(family, s, tier="easy")
                par = run_parallel(ep, scheme, cfg)
                rec = run_recurrent(ep, scheme, cfg)
                for a, b in zip(par, rec):
                    assert np.max(np.abs(a.outputs - b.outputs)) <= 1e-12
                    if a.decoded != b.decoded:
                        # only a tie at rounding level may flip the argmax
                        top = np.sort(a.outputs, axis=1)[:, -2:]
                        assert np.min(top[:, 1] - top[:, 0]) <= 2e-12

    def test_state_size_constant(self):
        cfg = SkaConfig(rank_r=8, head_dim_p=4)
        rng = np.random.default_rng(0)
        state = RecurrentState(cfg, 3.0)
        sizes = {}
        for t in range(1, 10_001):
            state.step(rng.standard_normal(8), rng.standard_normal(4))
            if t in (10, 10_000):
                sizes[t] = (state.snapshot().size, state.state_bytes)
        assert sizes[10] == sizes[10_000] == (2 * 64 + 32 + 8 + 1, 8 * 169)

    def test_prev_key_tracks_last_step(self):
        cfg = SkaConfig(rank_r=4, head_dim_p=2)
        state = RecurrentState(cfg, 2.0)
        rng = np.random.default_rng(1)
        for _ in range(5):
            k = rng.standard_normal(4)
            state.step(k, rng.standard_normal(2))
            np.testing.assert_array_equal(state.stats.prev_key, k / 2.0)
        state.decode(k, np.ones(2), k)
        np.testing.assert_array_equal(state.stats.prev_key, k / 2.0)

    def test_decode_is_step_then_retrieve(self):
        cfg = SkaConfig(rank_r=12, head_dim_p=6)
        rng = np.random.default_rng(2)
        a, b = RecurrentState(cfg, 1.7), RecurrentState(cfg, 1.7)
        for _ in range(30):
            k, v, q = rng.standard_normal(12), rng.standard_normal(6), rng.standard_normal(12)
            ya = a.decode(k, v, q)
            b.step(k, v)
            assert np.array_equal(ya, b.retrieve(q))
        assert a.stats.count == b.stats.count == 30
        assert np.array_equal(a.snapshot(), b.snapshot())
        op = a.operator()
        ref = estimate(b.stats, cfg)
        assert np.array_equal(op.l, ref.l) and np.array_equal(op.a_hat, ref.a_hat)
        q = rng.standard_normal(12)
        assert np.array_equal(a.retrieve(q), retrieve_ska(ref, q / 1.7))

    def test_fp32_state_bytes(self):
        s = RecurrentState(SkaConfig(rank_r=4, head_dim_p=2), 1.0, fp32=True)
        assert s.state_bytes == 4 * (32 + 8 + 4 + 1)
        assert s.snapshot().dtype == np.float32


class TestMemory:
    def test_examples(self):
        assert memory_crossover(24, 32) == (1945, 35)
        assert memory_crossover(1, 1) == (5, 3)
        assert state_bytes(24, 32) == 8 * 1945 and state_bytes(24, 32, fp32=True) == 4 * 1945

    @settings(max_examples=200)
    @given(st.integers(1, 512), st.integers(1, 512))
    def test_smallest_crossover(self, r, p):
        floats, t = memory_crossover(r, p)
        assert floats == 2 * r * r + p * r + r + 1
        assert t * (r + p) > floats >= (t - 1) * (r + p)


class TestEvaluate:
    def test_report_shape(self, ortho):
        eps = [gen_mqar(4, 64, s) for s in range(5)]
        rep = evaluate(eps, ortho, CFG)
        cell = rep["per_family"]["mqar"]["kv=4,gap=64"]
        assert cell == {"episodes": 5, "queries": 20, "correct": 20, "accuracy": 1.0}
        assert rep["state_bytes"] == 8 * memory_crossover(32, 32)[0]
        assert rep["config"]["mode"] == "prefix" and rep["config"]["scheme"] == "orthogonal"

    def test_empty(self, ortho):
        with pytest.raises(EmptyDataset):
            evaluate([], ortho, CFG)

    def test_workers_match_serial(self, ortho):
        eps = [generate(f, s, tier="easy") for f in ("mqar", "tooltrace") for s in range(4)]
        a = evaluate(eps, ortho, CFG)
        b = evaluate(eps, ortho, CFG, workers=2)
        assert a["per_family"] == b["per_family"]
