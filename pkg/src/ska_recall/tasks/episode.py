from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from ..errors import ParseError

FAMILIES = ("mqar", "niah", "multihop", "commonword", "sysprompt-cot",
            "sysprompt-specific", "tooltrace", "economy")
TIERS = ("easy", "hard")


@dataclass(frozen=True)
class Query:
    position: int
    answer_tokens: tuple[int, ...]


@dataclass
class Episode:
    family: str
    tier: str | None
    seed: int
    tokens: list[int]
    mask: list[int]
    queries: list[Query]
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.tokens)

    @property
    def prefill_boundary(self) -> int:
        """Position of the first query token."""
        return min(q.position for q in self.queries)

    def cell(self) -> str:
        """Label used to group results in reports."""
        p = self.params
        if self.family == "mqar":
            return f"kv={p['kv']},gap={p['gap']}"
        if self.family in ("niah", "multihop", "commonword"):
            return f"len={len(self.tokens)}"
        return self.tier or "default"

    def to_record(self) -> dict:
        return {
            "family": self.family,
            "tier": self.tier,
            "seed": self.seed,
            "tokens": list(self.tokens),
            "mask": list(self.mask),
            "queries": [{"pos": q.position, "answer": list(q.answer_tokens)} for q in self.queries],
            "params": dict(self.params),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Episode":
        qs = [Query(int(q["pos"]), tuple(int(t) for t in q["answer"])) for q in rec["queries"]]
        ep = cls(str(rec["family"]), rec.get("tier"), int(rec["seed"]),
                 [int(t) for t in rec["tokens"]], [int(m) for m in rec["mask"]],
                 qs, dict(rec.get("params") or {}))
        ep.validate()
        return ep

    def validate(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.tier is not None and self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if len(self.mask) != len(self.tokens):
            raise ValueError("mask and tokens differ in length")
        if any(m not in (0, 1) for m in self.mask):
            raise ValueError("mask entries must be 0 or 1")
        if not self.queries:
            raise ValueError("episode has no queries")
        for q in self.queries:
            if not 0 <= q.position < len(self.tokens):
                raise ValueError(f"query position {q.position} out of range")
            if not q.answer_tokens:
                raise ValueError("empty answer")


def dumps(ep: Episode) -> str:
    return json.dumps(ep.to_record(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_jsonl(episodes: Iterable[Episode], fh) -> int:
    n = 0
    for ep in episodes:
        fh.write(dumps(ep))
        fh.write("\n")
        n += 1
    return n


def read_jsonl(fh) -> Iterator[Episode]:
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            yield Episode.from_record(rec)
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(str(exc), lineno) from exc
