"""Why token-level probabilities need marginalizing, and what the beam costs.

A word can be spelled by several token sequences. The canonical BPE encoding
is only one of them, so scoring it alone undercounts the probability of the
characters. Exact enumeration sums every analysis; the beam keeps the
``B`` best per character position and approaches the exact value as ``B``
grows.

Run: python3 demos/beam_vs_exact.py
"""

import math
from pathlib import Path

from charsurprisal import CharLM, train_bpe, train_ngram
from charsurprisal.lm import token_prefix_logprob

DATA = Path(__file__).resolve().parents[1] / "src" / "charsurprisal" / "data"


def main():
    corpus = (DATA / "corpus.txt").read_text(encoding="utf-8").splitlines()
    codec, _ = train_bpe(corpus, 200)
    lm = train_ngram([codec.encode(s) for s in corpus], order=3, smoothing=0.01, vocab_size=len(codec))
    print(f"codec: {len(codec)} tokens; trigram model over {len(corpus)} lines")

    text = "The old doctor listened"
    canonical = codec.encode(text)
    print(f"\ntext: {text!r}")
    print("canonical tokens:", [codec.tokens[t] for t in canonical])

    exact = CharLM(codec, lm, method="exact")
    n_analyses = len(exact.prefix_cover(text))
    print(f"token strings in the prefix cover: {n_analyses}")
    print(f"  log p, canonical tokenization only : {token_prefix_logprob(lm, canonical):9.4f}")
    ex = exact.prefix_logprob(text)
    print(f"  log p, exact (sum over the cover)  : {ex:9.4f}")
    for width in (1, 2, 5, 20):
        v = CharLM(codec, lm, beam_width=width).prefix_logprob(text)
        print(f"  log p, beam width {width:<3}             : {v:9.4f}   (missing mass {-math.expm1(v - ex):.1e})")

    print("\nsurprisal of the next word given the context, in bits:")
    ctx, word = "The old doctor", " listened"
    for label, charlm in [("exact", CharLM(codec, lm, method="exact", log_base=2)),
                          ("beam 5", CharLM(codec, lm, beam_width=5, log_base=2))]:
        print(f"  {label:<7} {-charlm.conditional_logprob(word, ctx):.4f}")
    print("\nA conditional is a ratio of two beam values, so the beam can land")
    print("on either side of the exact surprisal; only the prefix probability")
    print("itself is a guaranteed lower bound.")


if __name__ == "__main__":
    main()
