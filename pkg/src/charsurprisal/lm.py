"""Token-level language models.

Every model exposes the next-token distribution over the token alphabet plus
an end-of-string symbol. Distributions are arrays of natural-log
probabilities of length ``V + 1`` whose last entry is EOS.
"""

from __future__ import annotations

import json
import math
import threading
from collections import Counter, OrderedDict, defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bpe import _atomic_write

__all__ = [
    "EnumeratedTokenLM",
    "MarkovTokenLM",
    "NGramTokenLM",
    "NextTokenDistribution",
    "NormalizationError",
    "TokenLM",
    "token_prefix_logprob",
    "token_prefix_prob",
    "token_string_logprob",
    "token_string_prob",
    "train_ngram",
]

NGRAM_FORMAT = "charsurprisal-ngram/v1"


class NormalizationError(ValueError):
    pass


class NextTokenDistribution:
    """Log-probabilities of the next token and of EOS.

    Parameters
    ----------
    logprobs : array_like, shape (V,)
    eos_logprob : float
    atol : float
        Tolerance on ``sum(exp(.)) == 1``; violations raise
        :class:`NormalizationError` and nothing is renormalized.
    """

    __slots__ = ("table",)

    def __init__(self, logprobs, eos_logprob, atol=1e-9):
        table = np.empty(len(logprobs) + 1)
        table[:-1] = logprobs
        table[-1] = eos_logprob
        self.table = _checked(table, atol)

    @classmethod
    def from_table(cls, table, atol=1e-9):
        dist = cls.__new__(cls)
        dist.table = _checked(np.asarray(table, dtype=float), atol)
        return dist

    @property
    def logprobs(self) -> np.ndarray:
        return self.table[:-1]

    @property
    def eos_logprob(self) -> float:
        return float(self.table[-1])

    def __len__(self):
        return len(self.table) - 1


def _checked(table, atol):
    if np.isnan(table).any() or np.isposinf(table).any():
        raise NormalizationError("log-probabilities must be finite or -inf")
    total = math.fsum(np.exp(table))
    if abs(total - 1.0) > atol:
        raise NormalizationError(f"distribution sums to {total!r}, not 1")
    table.setflags(write=False)
    return table


class _LRU:
    """Thread-safe bounded cache."""

    def __init__(self, maxsize):
        self.maxsize = maxsize
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            value = self._data.get(key)
            if value is not None:
                self._data.move_to_end(key)
            return value

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def __len__(self):
        return len(self._data)


class TokenLM:
    """Base class: subclasses implement :meth:`_compute` for one context."""

    vocab_size: int
    cache_size = 65536

    def __init__(self, vocab_size: int):
        self.vocab_size = int(vocab_size)
        self._cache = _LRU(self.cache_size)

    @property
    def eos(self) -> int:
        return self.vocab_size

    def next_distribution(self, context: Sequence[int]) -> NextTokenDistribution:
        key = tuple(int(t) for t in context)
        dist = self._cache.get(key)
        if dist is None:
            dist = self._compute(key)
            if len(dist) != self.vocab_size:
                raise NormalizationError(
                    f"model returned {len(dist)} token entries, vocabulary has {self.vocab_size}"
                )
            self._cache.put(key, dist)
        return dist

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        """Length ``V + 1`` log-probability table, EOS last."""
        return self.next_distribution(context).table

    def _compute(self, context: tuple) -> NextTokenDistribution:
        raise NotImplementedError


def token_prefix_logprob(lm: TokenLM, tokens: Sequence[int]) -> float:
    total = 0.0
    for t in range(len(tokens)):
        total += lm.next_logprobs(tokens[:t])[tokens[t]]
        if total == -math.inf:
            break
    return float(total)


def token_prefix_prob(lm: TokenLM, tokens: Sequence[int]) -> float:
    """Probability that a string drawn from ``lm`` starts with ``tokens``."""
    return math.exp(token_prefix_logprob(lm, tokens))


def token_string_logprob(lm: TokenLM, tokens: Sequence[int]) -> float:
    prefix = token_prefix_logprob(lm, tokens)
    if prefix == -math.inf:
        return prefix
    return prefix + float(lm.next_logprobs(tokens)[-1])


def token_string_prob(lm: TokenLM, tokens: Sequence[int]) -> float:
    return math.exp(token_string_logprob(lm, tokens))


class MarkovTokenLM(TokenLM):
    """First-order Markov model given as an explicit transition table.

    ``transitions`` has shape ``(V + 1, V + 1)``: row ``V`` is the start
    state, row ``t`` follows token ``t``; columns are tokens then EOS.
    """

    def __init__(self, transitions):
        transitions = np.asarray(transitions, dtype=float)
        if transitions.ndim != 2 or transitions.shape[0] != transitions.shape[1]:
            raise ValueError("transition table must be square with V + 1 rows")
        super().__init__(transitions.shape[0] - 1)
        with np.errstate(divide="ignore"):
            self._rows = [
                NextTokenDistribution.from_table(np.log(row)) for row in transitions
            ]

    @classmethod
    def random(cls, vocab_size, rng, eos_weight=1.0, sparsity=0.0):
        """Dirichlet-sampled transitions; ``sparsity`` zeroes that share of token entries."""
        alpha = np.ones(vocab_size + 1)
        alpha[-1] = eos_weight
        table = rng.dirichlet(alpha, size=vocab_size + 1)
        if sparsity:
            mask = rng.random((vocab_size + 1, vocab_size)) < sparsity
            table[:, :-1][mask] = 0.0
            table /= table.sum(axis=1, keepdims=True)
        return cls(table)

    def _compute(self, context):
        return self._rows[context[-1] if context else self.vocab_size]


class EnumeratedTokenLM(TokenLM):
    """A distribution given by listing token strings with their probabilities.

    Conditionals are ratios of prefix masses. Contexts of zero prefix mass
    get the uniform distribution so that every context stays defined.
    """

    def __init__(self, vocab_size: int, strings: Mapping[tuple, float]):
        super().__init__(vocab_size)
        probs = {tuple(int(t) for t in k): float(v) for k, v in strings.items()}
        if any(p < 0 for p in probs.values()):
            raise ValueError("string probabilities must be non-negative")
        total = math.fsum(probs.values())
        if abs(total - 1.0) > 1e-9:
            raise NormalizationError(f"string probabilities sum to {total!r}")
        for s in probs:
            if any(not 0 <= t < vocab_size for t in s):
                raise ValueError(f"string {s} uses ids outside 0..{vocab_size - 1}")
        self.strings = probs
        self._mass = defaultdict(float)
        for s, p in probs.items():
            for n in range(len(s) + 1):
                self._mass[s[:n]] += p

    def _compute(self, context):
        denom = self._mass.get(context, 0.0)
        if denom <= 0.0:
            return NextTokenDistribution.from_table(
                np.full(self.vocab_size + 1, -math.log(self.vocab_size + 1))
            )
        probs = np.zeros(self.vocab_size + 1)
        for t in range(self.vocab_size):
            probs[t] = self._mass.get(context + (t,), 0.0)
        probs[-1] = self.strings.get(context, 0.0)
        probs /= denom
        with np.errstate(divide="ignore"):
            return NextTokenDistribution.from_table(np.log(probs), atol=1e-9)


class NGramTokenLM(TokenLM):
    """Additively smoothed n-gram model with stupid backoff.

    A context is cut to its last ``order - 1`` tokens (the string start is a
    padding symbol) and then shortened until it was seen in training. The
    surviving context ``h`` gives ``(c(h, t) + k) / (c(h) + k (V + 1))``
    with EOS counted as an ordinary outcome.
    """

    BOS = -1

    def __init__(self, vocab_size, order, smoothing, counts):
        super().__init__(vocab_size)
        if order < 1:
            raise ValueError(f"n-gram order must be >= 1, got {order}")
        if not smoothing > 0:
            raise ValueError(f"smoothing constant must be > 0, got {smoothing}")
        self.order = int(order)
        self.smoothing = float(smoothing)
        # context tuple -> Counter over next ids (EOS == vocab_size)
        self.counts = {tuple(h): Counter(c) for h, c in counts.items()}
        self._totals = {h: sum(c.values()) for h, c in self.counts.items()}

    def history(self, context: Sequence[int]) -> tuple:
        n = self.order - 1
        if n == 0:
            return ()
        padded = (self.BOS,) * n + tuple(context)
        h = padded[len(padded) - n :]
        while h and h not in self.counts:
            h = h[1:]
        return h

    def _compute(self, context):
        h = self.history(context)
        counts = self.counts.get(h, {})
        total = self._totals.get(h, 0)
        table = np.full(self.vocab_size + 1, float(self.smoothing))
        for t, c in counts.items():
            table[t] += c
        table /= total + self.smoothing * (self.vocab_size + 1)
        return NextTokenDistribution.from_table(np.log(table))

    def perplexity(self, strings: Iterable[Sequence[int]]) -> float:
        """Per-token perplexity, EOS included as a predicted token."""
        total, n = 0.0, 0
        for s in strings:
            total += token_string_logprob(self, s)
            n += len(s) + 1
        return math.exp(-total / n)

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        payload = {
            "format": NGRAM_FORMAT,
            "vocab_size": self.vocab_size,
            "order": self.order,
            "smoothing": self.smoothing,
            "counts": [
                [list(h), sorted([int(t), int(c)] for t, c in cnt.items())]
                for h, cnt in sorted(self.counts.items())
            ],
        }
        _atomic_write(path, json.dumps(payload, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path) -> "NGramTokenLM":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
            if payload.get("format") != NGRAM_FORMAT:
                raise ValueError(f"unsupported format {payload.get('format')!r}")
            counts = {tuple(h): {t: c for t, c in pairs} for h, pairs in payload["counts"]}
            return cls(payload["vocab_size"], payload["order"], payload["smoothing"], counts)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: not a valid n-gram model ({exc})") from exc


def train_ngram(corpus: Sequence[Sequence[int]], order: int, smoothing: float, vocab_size: int):
    """Count n-grams of a tokenized corpus; each string ends with EOS."""
    if order < 1:
        raise ValueError(f"n-gram order must be >= 1, got {order}")
    if not smoothing > 0:
        raise ValueError(f"smoothing constant must be > 0, got {smoothing}")
    if not corpus:
        raise ValueError("cannot train an n-gram model on an empty corpus")
    n = order - 1
    counts = defaultdict(Counter)
    for s in corpus:
        if any(not 0 <= t < vocab_size for t in s):
            raise ValueError("token id outside the vocabulary")
        padded = (NGramTokenLM.BOS,) * n + tuple(s) + (vocab_size,)
        for pos in range(n, len(padded)):
            nxt = padded[pos]
            for length in range(n + 1):
                counts[padded[pos - length : pos]][nxt] += 1
    return NGramTokenLM(vocab_size, order, smoothing, counts)
