"""Byte-pair-encoding codec over characters.

Tokens are arbitrary non-empty character strings; whitespace is an ordinary
character. Encoding applies the learned merges in training order, so
``decode(encode(s)) == s`` holds for any string over the base alphabet.
"""

from __future__ import annotations

import os
import tempfile
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BPECodec",
    "CodecFormatError",
    "DecodeTrie",
    "DecodingError",
    "EncodingError",
    "escape",
    "train_bpe",
    "unescape",
]

VOCAB_HEADER = "#charsurprisal-vocab\tv1"
MERGES_HEADER = "#charsurprisal-merges\tv1"


class EncodingError(ValueError):
    def __init__(self, char, offset):
        super().__init__(f"character {char!r} at offset {offset} is not in the base alphabet")
        self.char = char
        self.offset = offset


class DecodingError(ValueError):
    pass


class CodecFormatError(ValueError):
    pass


class _Node:
    __slots__ = ("children", "token", "_subtree")

    def __init__(self):
        self.children = {}
        self.token = -1
        self._subtree = None


class DecodeTrie:
    """Prefix tree over token decodings."""

    def __init__(self, decodings: Sequence[str]):
        self.root = _Node()
        for token_id, text in enumerate(decodings):
            node = self.root
            for ch in text:
                node = node.children.setdefault(ch, _Node())
            node.token = token_id

    def lookup(self, text: str) -> int:
        """Token id whose decoding is exactly ``text``, or -1."""
        node = self.walk(self.root, text)
        return -1 if node is None else node.token

    @staticmethod
    def walk(node, text):
        for ch in text:
            node = node.children.get(ch)
            if node is None:
                return None
        return node

    @staticmethod
    def subtree(node) -> np.ndarray:
        """Ids of all tokens at or below ``node``, cached on the node."""
        if node._subtree is None:
            ids = []
            stack = [node]
            while stack:
                cur = stack.pop()
                if cur.token >= 0:
                    ids.append(cur.token)
                stack.extend(cur.children.values())
            node._subtree = np.array(sorted(ids), dtype=np.intp)
        return node._subtree


class BPECodec:
    """Token alphabet with encode (characters to tokens) and decode.

    Parameters
    ----------
    tokens : sequence of str
        Decoding of each token id; ids are positions in this sequence.
    merges : sequence of (str, str)
        Merge list in training order. Both sides and their concatenation
        must be tokens.
    """

    def __init__(self, tokens: Sequence[str], merges: Sequence[tuple] = ()):
        self.tokens = tuple(tokens)
        self.merges = tuple((str(a), str(b)) for a, b in merges)
        self._index = {}
        for i, t in enumerate(self.tokens):
            if not t:
                raise CodecFormatError(f"token {i} has an empty decoding")
            if t in self._index:
                raise CodecFormatError(f"duplicate decoding {t!r} (ids {self._index[t]} and {i})")
            self._index[t] = i
        self.base_alphabet = frozenset(t for t in self.tokens if len(t) == 1)
        self._ranks = {}
        for rank, (a, b) in enumerate(self.merges):
            for part in (a, b, a + b):
                if part not in self._index:
                    raise CodecFormatError(f"merge ({a!r}, {b!r}) refers to unknown token {part!r}")
            self._ranks.setdefault((a, b), rank)
        self.trie = DecodeTrie(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other):
        if not isinstance(other, BPECodec):
            return NotImplemented
        return self.tokens == other.tokens and self.merges == other.merges

    def __repr__(self):
        return f"BPECodec(V={len(self.tokens)}, merges={len(self.merges)})"

    def token_id(self, text: str) -> int:
        return self._index[text]

    def encode(self, text: str) -> list:
        for offset, ch in enumerate(text):
            if ch not in self.base_alphabet:
                raise EncodingError(ch, offset)
        parts = list(text)
        ranks = self._ranks
        while len(parts) > 1:
            best, best_rank = None, None
            for pair in zip(parts, parts[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            merged = []
            i = 0
            while i < len(parts):
                if i + 1 < len(parts) and (parts[i], parts[i + 1]) == best:
                    merged.append(parts[i] + parts[i + 1])
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        return [self._index[p] for p in parts]

    def decode(self, ids: Iterable[int]) -> str:
        out = []
        for i in ids:
            if not (isinstance(i, (int, np.integer)) and 0 <= i < len(self.tokens)):
                raise DecodingError(f"unknown token id {i!r}")
            out.append(self.tokens[i])
        return "".join(out)

    def tokens_matching(self, remainder: str):
        """Split the tokens that fit at the start of ``remainder``.

        Returns ``(inside, covering)``: ids whose decoding is a proper prefix
        of ``remainder``, and ids whose decoding has ``remainder`` as a
        prefix (equality included).
        """
        if not remainder:
            raise ValueError("remainder must be non-empty")
        inside = set()
        node = self.trie.root
        for depth, ch in enumerate(remainder):
            if depth and node.token >= 0:
                inside.add(node.token)
            node = node.children.get(ch)
            if node is None:
                return inside, set()
        return inside, set(DecodeTrie.subtree(node).tolist())

    # -- persistence -------------------------------------------------------

    def save(self, vocab_path, merges_path) -> None:
        vocab_lines = [VOCAB_HEADER] + [f"{i}\t{escape(t)}" for i, t in enumerate(self.tokens)]
        merge_lines = [MERGES_HEADER] + [f"{escape(a)}\t{escape(b)}" for a, b in self.merges]
        _atomic_write(vocab_path, "\n".join(vocab_lines) + "\n")
        _atomic_write(merges_path, "\n".join(merge_lines) + "\n")

    @classmethod
    def load(cls, vocab_path, merges_path) -> "BPECodec":
        tokens = []
        for lineno, fields in _records(vocab_path, VOCAB_HEADER):
            if len(fields) != 2 or not fields[0].isdigit():
                raise CodecFormatError(f"{vocab_path}:{lineno}: expected '<id>\\t<token>'")
            if int(fields[0]) != len(tokens):
                raise CodecFormatError(f"{vocab_path}:{lineno}: ids must be dense, got {fields[0]}")
            tokens.append(unescape(fields[1]))
        merges = []
        for lineno, fields in _records(merges_path, MERGES_HEADER):
            if len(fields) != 2:
                raise CodecFormatError(f"{merges_path}:{lineno}: expected '<left>\\t<right>'")
            merges.append((unescape(fields[0]), unescape(fields[1])))
        return cls(tokens, merges)


def train_bpe(corpus: Sequence[str], vocab_size: int, min_frequency: int = 2):
    """Learn a BPE codec from a list of strings.

    Starts from the distinct characters of the corpus and repeatedly merges
    the most frequent adjacent pair. Ties go to the lexicographically
    smallest merged string, then to the smallest left part. Training stops
    when the vocabulary reaches ``vocab_size`` or no pair occurs at least
    ``min_frequency`` times.

    Returns
    -------
    codec : BPECodec
    merges : list of (str, str)
    """
    corpus = [s for s in corpus]
    if not corpus or not any(corpus):
        raise ValueError("cannot train BPE on an empty corpus")
    alphabet = sorted(set("".join(corpus)))
    if vocab_size < len(alphabet):
        raise ValueError(
            f"vocab_size {vocab_size} is below the {len(alphabet)} distinct characters of the corpus"
        )
    # identical strings are merged identically; work on distinct ones with weights
    seqs = [(list(s), w) for s, w in Counter(s for s in corpus if s).items()]
    vocab = list(alphabet)
    known = set(vocab)
    merges = []
    while len(vocab) < vocab_size:
        counts = Counter()
        for parts, w in seqs:
            for pair in zip(parts, parts[1:]):
                counts[pair] += w
        if not counts:
            break
        pair, freq = min(counts.items(), key=lambda kv: (-kv[1], kv[0][0] + kv[0][1], kv[0][0]))
        if freq < min_frequency:
            break
        a, b = pair
        merges.append(pair)
        if a + b not in known:
            known.add(a + b)
            vocab.append(a + b)
        for idx, (parts, w) in enumerate(seqs):
            if len(parts) < 2:
                continue
            out = []
            i = 0
            while i < len(parts):
                if i + 1 < len(parts) and parts[i] == a and parts[i + 1] == b:
                    out.append(a + b)
                    i += 2
                else:
                    out.append(parts[i])
                    i += 1
            seqs[idx] = (out, w)
    return BPECodec(vocab, merges), merges


# -- file format helpers ---------------------------------------------------

_ESCAPES = {" ": "\\s", "\t": "\\t", "\n": "\\n", "\r": "\\r", "\\": "\\\\"}
_UNESCAPES = {"s": " ", "t": "\t", "n": "\n", "r": "\r", "\\": "\\"}


def escape(text: str) -> str:
    out = []
    for ch in text:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ch.isspace() or not ch.isprintable():
            out.append(f"\\U{ord(ch):08x}")
        else:
            out.append(ch)
    return "".join(out)


def unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        code = text[i + 1 : i + 2]
        if code in _UNESCAPES:
            out.append(_UNESCAPES[code])
            i += 2
        elif code == "U" and len(text) >= i + 10:
            out.append(chr(int(text[i + 2 : i + 10], 16)))
            i += 10
        else:
            raise CodecFormatError(f"bad escape sequence in {text!r}")
    return "".join(out)


def _records(path, header):
    with open(path, encoding="utf-8", newline="\n") as fh:
        first = fh.readline().rstrip("\n")
        if first != header:
            raise CodecFormatError(f"{path}: expected header {header!r}, found {first!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if line:
                yield lineno, line.split("\t")


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
