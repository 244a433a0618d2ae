"""Replay oracles: recover every (query position, answer) from tokens alone.

Nothing here imports the generators; the rules are re-implemented from the
token grammar so the two sides check each other.
"""

from __future__ import annotations

from collections import Counter

from .vocab import (ARROW, COLON, EQ, GOLD, GT, MINUS, PLUS, QUERY, REST, SEP,
                    SYS, VOCAB, WOOD, Vocab)


def _leading_pairs(tokens, stop):
    """Bindings from consecutive (a, b) pairs before the first ``stop`` token."""
    table = {}
    i = 0
    while i + 1 < len(tokens) and not stop(tokens[i]):
        table[tokens[i]] = tokens[i + 1]
        i += 2
    return table


def _pair_queries(tokens, table):
    return [(i + 1, (table[tokens[i + 1]],)) for i, t in enumerate(tokens[:-1]) if t == QUERY]


def replay_mqar(tokens, vocab: Vocab = VOCAB):
    table = _leading_pairs(tokens, lambda t: t == QUERY or t in vocab.distractors)
    return _pair_queries(tokens, table)


def replay_niah(tokens, vocab: Vocab = VOCAB):
    table = {}
    end = tokens.index(QUERY)
    for i in range(end - 1):
        if tokens[i] in vocab.keys and tokens[i + 1] in vocab.values:
            table[tokens[i]] = tokens[i + 1]
    return _pair_queries(tokens, table)


def replay_multihop(tokens, vocab: Vocab = VOCAB):
    table = _leading_pairs(tokens, lambda t: t == QUERY or t in vocab.distractors)
    out = []
    for i in [j for j, t in enumerate(tokens[:-1]) if t == QUERY]:
        pos, k = i + 1, tokens[i + 1]
        seen = set()
        while k in vocab.keys:
            if k in seen:
                raise ValueError("cyclic chain")
            seen.add(k)
            k = table[k]
        out.append((pos, (k,)))
    return out


def replay_commonword(tokens, vocab: Vocab = VOCAB):
    end = tokens.index(QUERY)
    counts = Counter(tokens[:end]).most_common()
    if len(counts) > 1 and counts[0][1] == counts[1][1]:
        raise ValueError("no unique mode")
    return [(end + 1, (counts[0][0],))]


def replay_sysprompt(tokens, vocab: Vocab = VOCAB):
    binding = {}
    out = []
    i = 0
    n = len(tokens)
    while i < n:
        t = tokens[i]
        if t == SYS and i + 3 < n and tokens[i + 2] == EQ:
            binding[tokens[i + 1]] = tokens[i + 3]
            i += 4
        elif t == QUERY:
            out.append((i + 2, (binding[tokens[i + 1]],)))
            i += 3
        else:
            i += 1
    return out


def replay_tooltrace(tokens, vocab: Vocab = VOCAB):
    latest = {}
    out = []
    i = 0
    while i < len(tokens):
        if tokens[i] == QUERY:
            a, c, tool, e = tokens[i + 1:i + 5]
            assert c == COLON and e == EQ
            out.append((i + 4, (latest[(a, tool)],)))
            i += 5
        elif i + 4 < len(tokens) and tokens[i + 1] == COLON and tokens[i + 3] == ARROW:
            latest[(tokens[i], tokens[i + 2])] = tokens[i + 4]
            i += 6
        else:
            raise ValueError(f"unexpected token at {i}")
    return out


_RES = {GOLD: "g", WOOD: "w"}


def parse_economy(tokens, vocab: Vocab = VOCAB):
    """Replay the economy log.

    Returns ``(history, queries)``: ``history`` is a list of
    (step kind, state dict) snapshots starting with the endowment;
    ``queries`` is the list of (position, answer tokens).
    """
    d = vocab.digit_value
    counts = {}
    history = []
    out = []
    i = 0
    n = len(tokens)

    def snap(kind):
        history.append((kind, {a: dict(v) for a, v in counts.items()}))

    while i < n:
        t = tokens[i]
        if t == QUERY:
            if not history:
                snap("init")
            agent, res = tokens[i + 1], _RES[tokens[i + 2]]
            out.append((i + 3, tuple(vocab.number(counts[agent][res]))))
            i += 4
            continue
        if t in vocab.distractors:
            i += 1
            continue
        if t == SEP:
            i += 1
            continue
        nxt = tokens[i + 1]
        if nxt in vocab.digits:  # header: A dd g dd w
            counts[t] = {"g": 10 * d(nxt) + d(tokens[i + 2]),
                         "w": 10 * d(tokens[i + 4]) + d(tokens[i + 5])}
            i += 7
            continue
        if not history:
            snap("init")
        if nxt == PLUS:
            res = _RES[tokens[i + 3]]
            counts[t][res] = min(99, counts[t][res] + d(tokens[i + 2]))
            snap("mine")
            i += 4
        elif nxt == MINUS:
            j = i + 2
            while j < n and tokens[j] in vocab.digits:
                counts[t][_RES[tokens[j + 1]]] -= d(tokens[j])
                j += 2
            snap("build")
            i = j
        elif nxt == GT:
            b, q, res = tokens[i + 2], d(tokens[i + 3]), _RES[tokens[i + 4]]
            counts[t][res] -= q
            counts[b][res] += q
            snap("trade")
            i += 5
        elif nxt == REST:
            snap("rest")
            i += 2
        else:
            raise ValueError(f"unparseable economy token at {i}")
    return history, out


def replay_economy(tokens, vocab: Vocab = VOCAB):
    return parse_economy(tokens, vocab)[1]


_REPLAY = {
    "mqar": replay_mqar,
    "niah": replay_niah,
    "multihop": replay_multihop,
    "commonword": replay_commonword,
    "sysprompt-cot": replay_sysprompt,
    "sysprompt-specific": replay_sysprompt,
    "tooltrace": replay_tooltrace,
    "economy": replay_economy,
}


def replay(family, tokens, vocab: Vocab = VOCAB):
    """List of (query position, answer tokens) derived from ``tokens``."""
    return _REPLAY[family](list(tokens), vocab)


def oracle_agrees(ep) -> bool:
    got = replay(ep.family, ep.tokens)
    want = [(q.position, tuple(q.answer_tokens)) for q in ep.queries]
    return got == want
