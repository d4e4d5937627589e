"""Character-level probabilities from a token-level language model.

A character string's prefix probability is the total prefix probability of
its prefix cover: token strings whose decoding minus the last token is a
proper prefix of the string and whose full decoding extends it. Two routes
compute it:

* exact: enumerate the cover explicitly and add up token prefix
  probabilities (exponential in the worst case, capped);
* beam: walk the string one character at a time, keeping for every number
  of consumed characters only the ``B`` most probable token strings that
  decode exactly to that prefix. Every partial token string is extended
  through the decoding trie, so the tokens that cover the rest of the
  string are summed in one step. The result never exceeds the exact value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from .bpe import BPECodec, DecodeTrie, EncodingError
from .lm import TokenLM, token_prefix_logprob, token_string_logprob
from .text import FocalArea, FocalSpec, ROISequence, Stimulus, focal_area

__all__ = [
    "CharLM",
    "CoverExplosionError",
    "PrefixBeam",
    "SurprisalCell",
    "UndefinedConditionalError",
    "char_conditional",
    "char_eos_prob",
    "char_prefix_prob",
    "prefix_cover_exact",
    "surprisal",
    "surprisal_batch",
]

NEG_INF = -math.inf


class CoverExplosionError(RuntimeError):
    pass


class UndefinedConditionalError(ZeroDivisionError):
    pass


def _lse(values) -> float:
    """log(sum(exp(values))) without overflow; -inf for an empty input."""
    if not len(values):
        return NEG_INF
    v = np.asarray(values, dtype=float)
    m = v.max()
    if m == NEG_INF:
        return NEG_INF
    return float(m + np.log(np.exp(v - m).sum()))


@dataclass(frozen=True)
class CoverState:
    tokens: tuple
    chars_consumed: int
    logprob: float


class PrefixBeam:
    """Incremental prefix-probability computation over a growing string.

    After ``extend(text)``, ``prefix_logprobs[n]`` holds the log prefix
    probability of the first ``n`` characters pushed so far. Extending an
    existing run continues from its states, so a context and any of its
    continuations are scored with the same surviving tokenizations.

    Parameters
    ----------
    codec, lm
        The tokenizer and the token-level model.
    width : int or None
        States kept per number of consumed characters; ``None`` keeps all.
    state_cap : int or None
        Abort with :class:`CoverExplosionError` after creating this many
        states.
    """

    def __init__(self, codec: BPECodec, lm: TokenLM, width: Optional[int] = None, state_cap=None):
        if width is not None and width < 1:
            raise ValueError(f"beam width must be >= 1, got {width}")
        if lm.vocab_size != len(codec):
            raise ValueError(f"LM has {lm.vocab_size} tokens, codec has {len(codec)}")
        self.codec = codec
        self.lm = lm
        self.width = width
        self.state_cap = state_cap
        self.text = ""
        self.prefix_logprobs = [0.0]
        self.states_created = 1
        self._levels = {0: [((), 0.0)]}
        self._open = []

    def _prune(self, states):
        states = [s for s in states if s[1] > NEG_INF]
        if self.width is not None and len(states) > self.width:
            states.sort(key=lambda s: (-s[1], s[0]))
            states = states[: self.width]
        return states

    def push(self, ch: str) -> float:
        n = len(self.text)
        root = self.codec.trie.root
        for tokens, lp in self._prune(self._levels.pop(n, [])):
            self._open.append((tokens, lp, self.lm.next_logprobs(tokens), root))
        arrived = []
        masses = []
        still_open = []
        for tokens, lp, table, node in self._open:
            child = node.children.get(ch)
            if child is None:
                continue
            masses.append(lp + _lse(table[DecodeTrie.subtree(child)]))
            if child.token >= 0:
                arrived.append((tokens + (child.token,), lp + float(table[child.token])))
            if child.children:
                still_open.append((tokens, lp, table, child))
        self._open = still_open
        if arrived:
            self.states_created += len(arrived)
            if self.state_cap is not None and self.states_created > self.state_cap:
                raise CoverExplosionError(
                    f"more than {self.state_cap} token prefixes after {n + 1} characters"
                )
            self._levels[n + 1] = arrived
        self.text += ch
        lp = _lse(masses)
        self.prefix_logprobs.append(lp)
        return lp

    def extend(self, text: str) -> float:
        for ch in text:
            self.push(ch)
        return self.prefix_logprobs[-1]

    def complete_logprob(self) -> float:
        """Log probability that the model generates exactly the text pushed so far."""
        states = self._prune(list(self._levels.get(len(self.text), [])))
        return _lse([lp + float(self.lm.next_logprobs(tokens)[-1]) for tokens, lp in states])

    def states(self):
        """Pending states (token string decoding exactly to the text pushed so far)."""
        n = len(self.text)
        return [CoverState(t, n, lp) for t, lp in self._prune(list(self._levels.get(n, [])))]


@dataclass(frozen=True)
class SurprisalCell:
    roi_index: int
    spec: FocalSpec
    focal_yield: Optional[str]
    value: Optional[float]
    status: str
    error: Optional[str] = None


class CharLM:
    """Character-level view of a token-level language model.

    Parameters
    ----------
    codec : BPECodec
    lm : TokenLM
    method : {"beam", "exact"}
    beam_width : int
        Beam size for ``method="beam"``.
    state_cap : int
        Cover-size limit for exact enumeration.
    log_base : float
        Base in which surprisal values are reported (``math.e`` for nats).
    """

    def __init__(
        self,
        codec: BPECodec,
        lm: TokenLM,
        method: str = "beam",
        beam_width: int = 5,
        state_cap: int = 100_000,
        log_base: float = math.e,
    ):
        if method not in ("beam", "exact"):
            raise ValueError(f"unknown method {method!r}")
        if beam_width < 1:
            raise ValueError(f"beam width must be >= 1, got {beam_width}")
        if lm.vocab_size != len(codec):
            raise ValueError(f"LM has {lm.vocab_size} tokens, codec has {len(codec)}")
        self.codec = codec
        self.lm = lm
        self.method = method
        self.beam_width = beam_width
        self.state_cap = state_cap
        self.log_base = log_base

    def _check_alphabet(self, text):
        for offset, ch in enumerate(text):
            if ch not in self.codec.base_alphabet:
                raise ValueError(f"character {ch!r} at offset {offset} is not in the codec alphabet")

    # -- exact enumeration -------------------------------------------------

    def prefix_cover(self, text: str) -> set:
        """All token strings in the prefix cover of ``text``."""
        if not text:
            return {()}
        cover = set()
        stack = [((), 0)]
        seen = 0
        while stack:
            tokens, pos = stack.pop()
            inside, covering = self.codec.tokens_matching(text[pos:])
            for t in covering:
                cover.add(tokens + (t,))
            for t in inside:
                stack.append((tokens + (t,), pos + len(self.codec.tokens[t])))
            seen += len(inside) + len(covering)
            if seen > self.state_cap:
                raise CoverExplosionError(
                    f"prefix cover of a {len(text)}-character string exceeds "
                    f"{self.state_cap} states; use the beam method"
                )
        return cover

    def tokenizations(self, text: str) -> list:
        """All token strings decoding exactly to ``text``."""
        out = []
        stack = [((), 0)]
        seen = 0
        while stack:
            tokens, pos = stack.pop()
            if pos == len(text):
                out.append(tokens)
                continue
            inside, _ = self.codec.tokens_matching(text[pos:])
            whole = self.codec.trie.lookup(text[pos:])
            if whole >= 0:
                out.append(tokens + (whole,))
            for t in inside:
                stack.append((tokens + (t,), pos + len(self.codec.tokens[t])))
            seen += len(inside) + 1
            if seen > self.state_cap:
                raise CoverExplosionError(
                    f"tokenizations of a {len(text)}-character string exceed {self.state_cap}"
                )
        return out

    def _exact_prefix_logprob(self, text):
        cover = sorted(self.prefix_cover(text))
        return _lse([token_prefix_logprob(self.lm, d) for d in cover])

    def _exact_string_logprob(self, text):
        return _lse([token_string_logprob(self.lm, d) for d in sorted(self.tokenizations(text))])

    # -- public quantities -------------------------------------------------

    def beam(self, width=None) -> PrefixBeam:
        """A fresh incremental run (``width`` defaults to the configured beam)."""
        return PrefixBeam(self.codec, self.lm, width or self.beam_width)

    def prefix_logprob(self, text: str) -> float:
        self._check_alphabet(text)
        if self.method == "exact":
            return self._exact_prefix_logprob(text)
        return self.beam().extend(text)

    def prefix_prob(self, text: str) -> float:
        return math.exp(self.prefix_logprob(text))

    def string_logprob(self, text: str) -> float:
        self._check_alphabet(text)
        if self.method == "exact":
            return self._exact_string_logprob(text)
        run = self.beam()
        run.extend(text)
        return run.complete_logprob()

    def conditional_logprob(self, continuation: str, context: str) -> float:
        self._check_alphabet(context + continuation)
        if self.method == "exact":
            denom = self._exact_prefix_logprob(context)
            if denom == NEG_INF:
                raise UndefinedConditionalError(f"context {context!r} has zero prefix probability")
            if not continuation:
                return 0.0
            return self._exact_prefix_logprob(context + continuation) - denom
        run = self.beam()
        denom = run.extend(context)
        if denom == NEG_INF:
            raise UndefinedConditionalError(f"context {context!r} has zero prefix probability")
        return run.extend(continuation) - denom

    def conditional(self, continuation: str, context: str) -> float:
        return math.exp(self.conditional_logprob(continuation, context))

    def eos_logprob(self, text: str) -> float:
        self._check_alphabet(text)
        if self.method == "exact":
            denom = self._exact_prefix_logprob(text)
            num = None if denom == NEG_INF else self._exact_string_logprob(text)
        else:
            run = self.beam()
            denom = run.extend(text)
            num = None if denom == NEG_INF else run.complete_logprob()
        if denom == NEG_INF:
            raise UndefinedConditionalError(f"{text!r} has zero prefix probability")
        return num - denom

    def eos_prob(self, text: str) -> float:
        return math.exp(self.eos_logprob(text))

    def _to_base(self, nats: float) -> float:
        return nats / math.log(self.log_base)

    def surprisal(self, focal: FocalArea, stimulus: Stimulus, include_eos: bool = False) -> float:
        """Surprisal of a focal area given the full stimulus prefix before it."""
        text = stimulus.text
        context = text[: focal.start - 1]
        target = stimulus.yield_of(focal.interval)
        nats = -self.conditional_logprob(target, context)
        if include_eos and focal.end == len(text) + 1:
            nats -= self.eos_logprob(text)
        return self._to_base(nats)

    def _prefix_curve(self, text: str, lengths):
        """Log prefix probabilities of ``text[:n]`` for each requested ``n``."""
        lengths = sorted(set(lengths))
        if self.method == "beam":
            run = self.beam()
            run.extend(text[: lengths[-1]] if lengths else "")
            return {n: run.prefix_logprobs[n] for n in lengths}, run
        return {n: self._exact_prefix_logprob(text[:n]) for n in lengths}, None

    def surprisal_batch(
        self, rois: ROISequence, specs: Sequence[FocalSpec], include_eos: bool = False
    ) -> dict:
        """Surprisal of every focal area of ROIs ``2..K``.

        Returns ``{(k, spec): SurprisalCell}``. A failing cell is recorded
        with ``status="error"`` instead of aborting the batch.
        """
        stimulus = rois.stimulus
        text = stimulus.text
        areas = {}
        cells = {}
        for spec in specs:
            for k in range(2, len(rois) + 1):
                area = focal_area(rois, k, spec)
                if area is None:
                    cells[(k, spec)] = SurprisalCell(k, spec, None, None, "missing")
                else:
                    areas[(k, spec)] = area
        if not areas:
            return cells
        needed = {a.start - 1 for a in areas.values()} | {a.end - 1 for a in areas.values()}
        curve, failures, eos_nats = {}, {}, None
        try:
            self._check_alphabet(text)
        except (EncodingError, ValueError) as exc:
            failures = dict.fromkeys(needed, f"{type(exc).__name__}: {exc}")
        if not failures and self.method == "beam":
            try:
                curve, _ = self._prefix_curve(text, needed)
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                failures = dict.fromkeys(needed, f"{type(exc).__name__}: {exc}")
        elif not failures:
            for n in sorted(needed):
                try:
                    curve[n] = self._exact_prefix_logprob(text[:n])
                except CoverExplosionError as exc:
                    failures[n] = str(exc)
        for key, area in sorted(areas.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
            k, spec = key
            focal_yield = stimulus.yield_of(area.interval)
            if area.start - 1 in failures or area.end - 1 in failures:
                reason = failures.get(area.start - 1) or failures.get(area.end - 1)
                cells[key] = SurprisalCell(k, spec, focal_yield, None, "error", reason)
                continue
            ctx, full = curve[area.start - 1], curve[area.end - 1]
            if ctx == NEG_INF:
                cells[key] = SurprisalCell(
                    k, spec, focal_yield, None, "error", "context has zero prefix probability"
                )
                continue
            nats = ctx - full
            if include_eos and area.end == len(text) + 1:
                try:
                    if eos_nats is None:
                        eos_nats = -self.eos_logprob(text)
                    nats += eos_nats
                except Exception as exc:  # noqa: BLE001
                    cells[key] = SurprisalCell(k, spec, focal_yield, None, "error", str(exc))
                    continue
            cells[key] = SurprisalCell(k, spec, focal_yield, self._to_base(nats), "ok")
        return cells

    def roi_surprisals(self, rois: ROISequence) -> list:
        """Full-ROI surprisal of every region ``1..K`` (used for spillover)."""
        text = rois.stimulus.text
        self._check_alphabet(text)
        bounds = [r.start - 1 for r in rois.regions] + [len(text)]
        curve, _ = self._prefix_curve(text, bounds)
        out = []
        for r in rois.regions:
            ctx, full = curve[r.start - 1], curve[r.end - 1]
            out.append(math.nan if ctx == NEG_INF else self._to_base(ctx - full))
        return out


# -- functional interface --------------------------------------------------


def prefix_cover_exact(charlm: CharLM, text: str) -> set:
    return charlm.prefix_cover(text)


def char_prefix_prob(charlm: CharLM, text: str) -> float:
    return charlm.prefix_prob(text)


def char_conditional(charlm: CharLM, continuation: str, context: str) -> float:
    return charlm.conditional(continuation, context)


def char_eos_prob(charlm: CharLM, text: str) -> float:
    return charlm.eos_prob(text)


def surprisal(charlm: CharLM, focal: FocalArea, stimulus: Stimulus, include_eos=False) -> float:
    return charlm.surprisal(focal, stimulus, include_eos=include_eos)


def surprisal_batch(charlm: CharLM, rois: ROISequence, specs, include_eos=False) -> dict:
    return charlm.surprisal_batch(rois, specs, include_eos=include_eos)
