"""Randomized comparison of beam summing against exact enumeration.

Checked on every query:

* the unpruned beam equals the exact prefix probability (relative 1e-9);
* the beam value is nondecreasing in the beam width;
* no beam width exceeds the exact value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bpe import BPECodec
from .lm import MarkovTokenLM, TokenLM
from .marginal import CharLM, PrefixBeam
from .regression import rng_stream

__all__ = ["OracleReport", "check_query", "oracle_check", "random_toy"]

REL_TOL = 1e-9


def random_toy(rng: np.random.Generator, alphabet="abc"):
    """A small codec with overlapping multi-character tokens and a random Markov LM."""
    alpha = list(alphabet[: int(rng.integers(2, len(alphabet) + 1))])
    extra = set()
    for _ in range(int(rng.integers(1, 9))):
        extra.add("".join(rng.choice(alpha, int(rng.integers(2, 4)))))
    codec = BPECodec(alpha + sorted(extra - set(alpha)))
    lm = MarkovTokenLM.random(len(codec), rng, eos_weight=0.5)
    return codec, lm, alpha


@dataclass
class OracleReport:
    trials: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _close(a, b):
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(math.expm1(a - b)) <= REL_TOL


def check_query(
    codec: BPECodec,
    lm: TokenLM,
    text: str,
    widths: Sequence[int] = tuple(range(1, 9)),
    beam_factory: Callable = PrefixBeam,
) -> list:
    """Violations (as dicts) for one query; empty when all properties hold."""
    exact = CharLM(codec, lm, method="exact").prefix_logprob(text)
    found = []
    unpruned = beam_factory(codec, lm, None).extend(text)
    if not _close(unpruned, exact):
        found.append({"property": "unpruned beam equals exact", "text": text,
                      "beam": unpruned, "exact": exact})
    prev, prev_w = -math.inf, None
    slack = 1e-12
    for w in widths:
        v = beam_factory(codec, lm, w).extend(text)
        if v > exact + slack * max(1.0, abs(exact)):
            found.append({"property": "beam never exceeds exact", "text": text,
                          "width": w, "beam": v, "exact": exact})
        if v < prev - slack * max(1.0, abs(prev)):
            found.append({"property": "monotone in beam width", "text": text,
                          "width": w, "beam": v, "previous_width": prev_w, "previous": prev})
        prev, prev_w = v, w
    return found


def oracle_check(
    trials: int,
    max_len: int = 8,
    seed: int = 0,
    codec: Optional[BPECodec] = None,
    lm: Optional[TokenLM] = None,
    beam_factory: Callable = PrefixBeam,
    widths: Sequence[int] = tuple(range(1, 9)),
) -> OracleReport:
    """Run ``trials`` random queries.

    With ``codec`` and ``lm`` given, only the query strings are random
    (drawn from the codec's base alphabet); otherwise every trial draws a
    fresh toy codec and model. ``beam_factory`` replaces :class:`PrefixBeam`
    (a hook for negative controls).
    """
    report = OracleReport(trials)
    for t in range(trials):
        rng = rng_stream(seed, "oracle-check", t)
        if codec is None:
            c, m, alpha = random_toy(rng)
        else:
            c, m, alpha = codec, lm, sorted(codec.base_alphabet)
        n = int(rng.integers(0, max_len + 1))
        text = "".join(rng.choice(alpha, n)) if n else ""
        for v in check_query(c, m, text, widths, beam_factory):
            v["trial"] = t
            if codec is None:
                v["tokens"] = list(c.tokens)
            report.failures.append(v)
    return report
