"""Synthetic recall task families, their token grammar and replay oracles."""

from .episode import FAMILIES, TIERS, Episode, Query, dumps, read_jsonl, write_jsonl
from .generators import (Action, encode_economy, gen_commonword, gen_economy, gen_mqar,
                         gen_multihop, gen_niah, gen_sysprompt, gen_tooltrace, generate)
from .oracles import oracle_agrees, parse_economy, replay
from .vocab import VOCAB, Vocab

__all__ = [
    "FAMILIES", "TIERS", "VOCAB", "Action", "Episode", "Query", "Vocab", "dumps",
    "encode_economy", "gen_commonword", "gen_economy", "gen_mqar", "gen_multihop",
    "gen_niah", "gen_sysprompt", "gen_tooltrace", "generate", "oracle_agrees",
    "parse_economy", "read_jsonl", "replay", "write_jsonl",
]
