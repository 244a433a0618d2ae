"""Deterministic seeded generators for the synthetic recall families.

Every generator builds its answers from its own structured record of the
episode; ``oracles.replay`` re-derives them from the token stream alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import RangeExhausted, TieUnresolvable
from .episode import Episode, Query
from .vocab import (ARROW, COLON, COT, EQ, GOLD, GT, MINUS, PLUS, QUERY, REST,
                    SEP, SYS, VOCAB, WOOD, Vocab)

TIER_RANGES = {
    "economy": {"easy": dict(steps=(5, 15), agents=3, gap=(0, 0)),
                "hard": dict(steps=(40, 100), agents=6, gap=(200, 400))},
    "tooltrace": {"easy": dict(calls=(10, 30), max_len=400),
                  "hard": dict(calls=(60, 120), max_len=1500)},
    "sysprompt-cot": {"easy": dict(n_vars=4, gap=(10, 30)),
                      "hard": dict(n_vars=4, gap=(150, 300))},
    "sysprompt-specific": {"easy": dict(n_vars=6, gap=(10, 30)),
                           "hard": dict(n_vars=6, gap=(80, 200))},
}

ENDOWMENT = 10
MAX_COUNT = 99
COMMONWORD_ATTEMPTS = 100


def _rng(seed):
    return np.random.default_rng(seed)


def _pick(rng, seq, n, replace=False):
    seq = list(seq)
    if not replace and n > len(seq):
        raise RangeExhausted(f"need {n} distinct tokens from a range of {len(seq)}")
    idx = rng.choice(len(seq), size=n, replace=replace)
    return [int(seq[i]) for i in np.atleast_1d(idx)]


def _fill(rng, seq, n):
    seq = np.asarray(list(seq))
    return [int(t) for t in seq[rng.integers(0, len(seq), size=n)]] if n else []


def _span(length, on):
    return [1 if on else 0] * length


def gen_mqar(kv, gap, seed, vocab: Vocab = VOCAB) -> Episode:
    """kv key/value facts, a gap of distractors, then one (QUERY, key) per fact."""
    if kv < 1 or gap < 0:
        raise ValueError("kv must be >= 1 and gap >= 0")
    rng = _rng(seed)
    keys = _pick(rng, vocab.keys, kv)
    vals = _fill(rng, vocab.values, kv)
    tokens, mask = [], []
    for k, v in zip(keys, vals):
        tokens += [k, v]
    mask += _span(2 * kv, True)
    tokens += _fill(rng, vocab.distractors, gap)
    mask += _span(gap, False)
    queries = []
    for i in rng.permutation(kv):
        tokens += [QUERY, keys[i]]
        mask += [0, 0]
        queries.append(Query(len(tokens) - 1, (vals[i],)))
    return Episode("mqar", None, seed, tokens, mask, queries, {"kv": kv, "gap": gap})


def gen_niah(kv, seq_len, seed, needle_positions=None, n_queries=1, vocab: Vocab = VOCAB) -> Episode:
    """Needle (key, value) pairs hidden in a distractor haystack.

    ``seq_len`` counts every token including the trailing (QUERY, key) pairs.
    """
    hay = seq_len - 2 * n_queries
    if kv < 1 or n_queries < 1 or n_queries > kv or hay < 2 * kv:
        raise ValueError("haystack too short for the requested needles")
    rng = _rng(seed)
    keys = _pick(rng, vocab.keys, kv)
    vals = _fill(rng, vocab.values, kv)
    if needle_positions is None:
        slots = np.sort(rng.choice(hay - kv, size=kv, replace=False))
        starts = [int(s) + i for i, s in enumerate(slots)]
    else:
        starts = sorted(int(p) for p in needle_positions)
        if len(starts) != kv or any(b - a < 2 for a, b in zip(starts, starts[1:])) \
                or starts[0] < 0 or starts[-1] + 2 > hay:
            raise ValueError("needle positions overlap or fall outside the haystack")
    tokens = _fill(rng, vocab.distractors, hay)
    mask = _span(hay, False)
    for s, k, v in zip(starts, keys, vals):
        tokens[s:s + 2] = [k, v]
        mask[s:s + 2] = [1, 1]
    queries = []
    for i in _pick(rng, range(kv), n_queries):
        tokens += [QUERY, keys[i]]
        mask += [0, 0]
        queries.append(Query(len(tokens) - 1, (vals[i],)))
    return Episode("niah", None, seed, tokens, mask, queries,
                   {"kv": kv, "seq_len": seq_len, "positions": starts})


def gen_multihop(kv, gap, seed, hops=2, vocab: Vocab = VOCAB) -> Episode:
    """Chains k1 -> k2 -> ... -> v stored as shuffled pairs; the query gives k1."""
    if kv < 1 or hops < 1:
        raise ValueError("kv and hops must be >= 1")
    rng = _rng(seed)
    keys = _pick(rng, vocab.keys, kv * hops)
    vals = _fill(rng, vocab.values, kv)
    pairs = []
    for c in range(kv):
        chain = keys[c * hops:(c + 1) * hops] + [vals[c]]
        pairs += [(chain[i], chain[i + 1]) for i in range(hops)]
    tokens = []
    for i in rng.permutation(len(pairs)):
        tokens += list(pairs[i])
    mask = _span(len(tokens), True)
    tokens += _fill(rng, vocab.distractors, gap)
    mask += _span(gap, False)
    queries = []
    for c in rng.permutation(kv):
        tokens += [QUERY, keys[c * hops]]
        mask += [0, 0]
        queries.append(Query(len(tokens) - 1, (vals[c],)))
    return Episode("multihop", None, seed, tokens, mask, queries,
                   {"kv": kv, "gap": gap, "hops": hops})


def gen_commonword(seq_len, seed, n_words=None, vocab: Vocab = VOCAB) -> Episode:
    """Content words followed by (QUERY, EQ); the answer is the unique mode."""
    n = seq_len - 2
    if n < 1:
        raise ValueError("seq_len must be >= 3")
    words = list(vocab.distractors)[:n_words] if n_words else list(vocab.distractors)
    rng = _rng(seed)
    for _ in range(COMMONWORD_ATTEMPTS):
        content = _fill(rng, words, n)
        counts = np.bincount(content, minlength=vocab.size)
        top = counts.max()
        if np.count_nonzero(counts == top) == 1:
            break
    else:
        raise TieUnresolvable(f"no unique mode after {COMMONWORD_ATTEMPTS} draws")
    tokens = content + [QUERY, EQ]
    mask = _span(n, True) + [0, 0]
    answer = int(np.argmax(counts))
    return Episode("commonword", None, seed, tokens, mask,
                   [Query(len(tokens) - 1, (answer,))], {"seq_len": seq_len})


def gen_sysprompt(subtask, tier, seed, n_vars=None, gap=None, vocab: Vocab = VOCAB) -> Episode:
    """System-prompt bindings (SYS var = val), reasoning filler, then queries.

    ``cot`` filler is distractor chatter with COT markers; ``specific`` filler
    also contains decoy bindings (COT var = wrong) that reuse real names.
    """
    family = f"sysprompt-{subtask}"
    limits = TIER_RANGES[family][tier]
    rng = _rng(seed)
    n_vars = limits["n_vars"] if n_vars is None else n_vars
    if gap is None:
        lo, hi = limits["gap"]
        gap = int(rng.integers(lo, hi + 1))
    names = _pick(rng, vocab.keys, n_vars)
    vals = _fill(rng, vocab.values, n_vars)
    tokens, mask = [], []
    for k, v in zip(names, vals):
        tokens += [SYS, k, EQ, v]
        mask += [1, 1, 1, 1]
    filler = []
    decoy_next = subtask == "specific"
    while len(filler) < gap:
        room = gap - len(filler)
        if subtask == "specific" and room >= 4 and (decoy_next or rng.random() < 0.25):
            i = int(rng.integers(n_vars))
            wrong = _pick(rng, [t for t in vocab.values if t != vals[i]], 1)[0]
            filler += [COT, names[i], EQ, wrong]
            decoy_next = False
        elif rng.random() < 0.15:
            filler.append(COT)
        else:
            filler += _fill(rng, vocab.distractors, 1)
    tokens += filler
    mask += _span(len(filler), False)
    queries = []
    for i in rng.permutation(n_vars):
        tokens += [QUERY, names[i], EQ]
        mask += [0, 0, 0]
        queries.append(Query(len(tokens) - 1, (vals[i],)))
    return Episode(family, tier, seed, tokens, mask, queries,
                   {"n_vars": n_vars, "gap": gap})


def gen_tooltrace(tier, seed, n_calls=None, n_agents=6, n_tools=8, vocab: Vocab = VOCAB) -> Episode:
    """Calls ``agent : tool -> result |``; the query asks for the latest result."""
    limits = TIER_RANGES["tooltrace"][tier]
    rng = _rng(seed)
    if n_calls is None:
        lo, hi = limits["calls"]
        n_calls = int(rng.integers(lo, hi + 1))
    if n_calls < 1:
        raise ValueError("need at least one call")
    if 6 * n_calls + 5 > limits["max_len"]:
        raise ValueError(f"{n_calls} calls exceed the {tier} tier length limit")
    agents = [vocab.agent(i) for i in range(n_agents)]
    tools = list(vocab.keys)[:n_tools]
    latest = {}
    tokens = []
    for _ in range(n_calls):
        a = agents[int(rng.integers(n_agents))]
        t = tools[int(rng.integers(n_tools))]
        res = _fill(rng, vocab.values, 1)[0]
        latest[(a, t)] = res
        tokens += [a, COLON, t, ARROW, res, SEP]
    mask = _span(len(tokens), True)
    pairs = sorted(latest)
    a, t = pairs[int(rng.integers(len(pairs)))]
    tokens += [QUERY, a, COLON, t, EQ]
    mask += _span(5, False)
    return Episode("tooltrace", tier, seed, tokens, mask,
                   [Query(len(tokens) - 1, (latest[(a, t)],))],
                   {"n_calls": n_calls, "n_agents": n_agents, "n_tools": n_tools})


# --- economy --------------------------------------------------------------

RESOURCES = ("g", "w")
_RES_TOKEN = {"g": GOLD, "w": WOOD}


@dataclass(frozen=True)
class Action:
    """One economy step. ``amounts`` maps resource to quantity; ``target``
    is the receiving agent of a trade."""

    kind: str
    agent: int
    amounts: tuple[tuple[str, int], ...] = ()
    target: int | None = None


def apply_action(state, act: Action):
    """Apply ``act`` to ``state`` ({resource: [count per agent]}) in place.

    Returns False, leaving ``state`` untouched, if the action is illegal.
    """
    a = act.agent
    if act.kind == "rest":
        return True
    if act.kind == "mine":
        for res, q in act.amounts:
            state[res][a] = min(MAX_COUNT, state[res][a] + q)
        return True
    if act.kind == "build":
        if any(state[res][a] < q for res, q in act.amounts):
            return False
        for res, q in act.amounts:
            state[res][a] -= q
        return True
    if act.kind == "trade":
        (res, q), = act.amounts
        b = act.target
        if b == a or state[res][a] < q or state[res][b] + q > MAX_COUNT:
            return False
        state[res][a] -= q
        state[res][b] += q
        return True
    raise ValueError(f"unknown action {act.kind!r}")


def _sample_action(rng, n_agents):
    a = int(rng.integers(n_agents))
    kind = ("mine", "build", "trade", "rest")[int(rng.integers(4))]
    if kind == "mine":
        return Action(kind, a, ((RESOURCES[int(rng.integers(2))], int(rng.integers(1, 4))),))
    if kind == "build":
        which = int(rng.integers(3))
        res = RESOURCES if which == 2 else (RESOURCES[which],)
        return Action(kind, a, tuple((r, int(rng.integers(1, 3))) for r in res))
    if kind == "trade":
        b = int(rng.integers(n_agents - 1))
        b = b + 1 if b >= a else b
        return Action(kind, a, ((RESOURCES[int(rng.integers(2))], int(rng.integers(1, 4))),), b)
    return Action(kind, a)


def _encode_action(act: Action, vocab: Vocab):
    ag = vocab.agent(act.agent)
    if act.kind == "rest":
        return [ag, REST]
    if act.kind == "mine":
        (res, q), = act.amounts
        return [ag, PLUS, vocab.digit(q), _RES_TOKEN[res]]
    if act.kind == "build":
        out = [ag, MINUS]
        for res, q in act.amounts:
            out += [vocab.digit(q), _RES_TOKEN[res]]
        return out
    (res, q), = act.amounts
    return [ag, GT, vocab.agent(act.target), vocab.digit(q), _RES_TOKEN[res]]


def encode_economy(actions, n_agents, query, gap_tokens=(), seed=0, tier=None,
                   vocab: Vocab = VOCAB) -> Episode:
    """Build an economy episode from an explicit, legal action list.

    ``query`` is a list of (agent, resource) pairs asked after the log.
    """
    state = {r: [ENDOWMENT] * n_agents for r in RESOURCES}
    tokens = []
    for i in range(n_agents):
        tokens += [vocab.agent(i), *vocab.number(ENDOWMENT), GOLD,
                   *vocab.number(ENDOWMENT), WOOD, SEP]
    for act in actions:
        if not apply_action(state, act):
            raise ValueError(f"illegal action {act}")
        tokens += _encode_action(act, vocab) + [SEP]
    mask = _span(len(tokens), True)
    tokens += list(gap_tokens)
    mask += _span(len(gap_tokens), False)
    queries = []
    for agent, res in query:
        tokens += [QUERY, vocab.agent(agent), _RES_TOKEN[res], EQ]
        mask += [0, 0, 0, 0]
        queries.append(Query(len(tokens) - 1, tuple(vocab.number(state[res][agent]))))
    return Episode("economy", tier, seed, tokens, mask, queries,
                   {"n_steps": len(actions), "n_agents": n_agents, "gap": len(gap_tokens)})


def economy_actions(rng, n_steps, n_agents):
    """Sample a legal action sequence, re-drawing illegal proposals."""
    state = {r: [ENDOWMENT] * n_agents for r in RESOURCES}
    out = []
    while len(out) < n_steps:
        act = _sample_action(rng, n_agents)
        if apply_action(state, act):
            out.append(act)
    return out


def gen_economy(tier, seed, n_steps=None, n_agents=None, gap=None, n_queries=1,
                vocab: Vocab = VOCAB) -> Episode:
    limits = TIER_RANGES["economy"][tier]
    rng = _rng(seed)
    n_agents = limits["agents"] if n_agents is None else n_agents
    if n_steps is None:
        n_steps = int(rng.integers(limits["steps"][0], limits["steps"][1] + 1))
    if gap is None:
        gap = int(rng.integers(limits["gap"][0], limits["gap"][1] + 1))
    actions = economy_actions(rng, n_steps, n_agents)
    gap_tokens = _fill(rng, vocab.distractors, gap)
    query = [(int(rng.integers(n_agents)), RESOURCES[int(rng.integers(2))])
             for _ in range(n_queries)]
    return encode_economy(actions, n_agents, query, gap_tokens, seed, tier, vocab)


def generate(family, seed, tier=None, **params) -> Episode:
    """Dispatch on family name. Unused keyword arguments set to None are ignored."""
    p = {k: v for k, v in params.items() if v is not None}
    if family == "mqar":
        return gen_mqar(p.get("kv", 8), p.get("gap", 64), seed)
    if family == "niah":
        return gen_niah(p.get("kv", 1), p.get("seq_len", 256), seed)
    if family == "multihop":
        return gen_multihop(p.get("kv", 4), p.get("gap", 64), seed)
    if family == "commonword":
        return gen_commonword(p.get("seq_len", 256), seed)
    tier = tier or "easy"
    if family in ("sysprompt-cot", "sysprompt-specific"):
        return gen_sysprompt(family.split("-")[1], tier, seed, gap=p.get("gap"))
    if family == "tooltrace":
        return gen_tooltrace(tier, seed)
    if family == "economy":
        return gen_economy(tier, seed, gap=p.get("gap"))
    raise ValueError(f"unknown family {family!r}")
