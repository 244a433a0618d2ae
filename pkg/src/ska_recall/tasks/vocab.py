"""Fixed 128-token vocabulary with disjoint role ranges."""

from __future__ import annotations

from dataclasses import dataclass

PAD, BOS, SEP, ARROW, QUERY, EQ, COLON, PLUS, MINUS, GT = range(10)
GOLD, WOOD, SYS, COT, REST = 10, 11, 12, 13, 14

STRUCT_NAMES = {
    PAD: "<pad>", BOS: "<bos>", SEP: "|", ARROW: "→", QUERY: "?", EQ: "=",
    COLON: ":", PLUS: "+", MINUS: "-", GT: ">", GOLD: "g", WOOD: "w",
    SYS: "<sys>", COT: "<cot>", REST: ".",
}


@dataclass(frozen=True)
class Vocab:
    size: int = 128
    digits: range = range(16, 26)
    agents: range = range(26, 32)
    keys: range = range(32, 64)
    values: range = range(64, 96)
    distractors: range = range(96, 128)

    def digit(self, d: int) -> int:
        return self.digits.start + d

    def number(self, n: int) -> list[int]:
        """Two digit tokens, zero padded, for 0 <= n <= 99."""
        if not 0 <= n <= 99:
            raise ValueError(f"{n} is outside 0..99")
        return [self.digit(n // 10), self.digit(n % 10)]

    def digit_value(self, tok: int) -> int:
        if tok not in self.digits:
            raise ValueError(f"token {tok} is not a digit")
        return tok - self.digits.start

    def agent(self, i: int) -> int:
        return self.agents.start + i

    def name(self, tok: int) -> str:
        if tok in STRUCT_NAMES:
            return STRUCT_NAMES[tok]
        if tok in self.digits:
            return str(tok - self.digits.start)
        if tok in self.agents:
            return "ABCDEF"[tok - self.agents.start]
        for label, rng in (("k", self.keys), ("v", self.values), ("x", self.distractors)):
            if tok in rng:
                return f"{label}{tok - rng.start}"
        return f"<{tok}>"


VOCAB = Vocab()
