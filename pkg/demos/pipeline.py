"""The whole desk-scale pipeline on the bundled data, through the CLI.

Trains a BPE codec and a trigram model on the bundled corpus, scores every
focal area of the 20 stimuli, and fits the regression report. Outputs land
in a temporary directory (or the one given as the first argument).

Run: python3 demos/pipeline.py [workdir]
"""

import json
import sys
import tempfile
import time
from pathlib import Path

from charsurprisal.cli import main as cli

DATA = Path(__file__).resolve().parents[1] / "src" / "charsurprisal" / "data"


def step(title, argv):
    print(f"\n$ charsurprisal {' '.join(map(str, argv))}")
    t0 = time.perf_counter()
    code = cli([str(a) for a in argv])
    print(f"[{title}: exit {code}, {time.perf_counter() - t0:.1f} s]")
    if code not in (0, 1):
        sys.exit(code)


def run(work: Path):
    v, m, lm = work / "vocab.txt", work / "merges.txt", work / "lm.json"
    step("tokenizer", ["bpe-train", "--corpus", DATA / "corpus.txt", "--vocab-size", 200,
                       "--vocab", v, "--merges", m])
    step("language model", ["lm-train", "--corpus", DATA / "corpus.txt", "--vocab", v, "--merges", m,
                            "--order", 3, "--lm", lm])
    step("surprisal", ["surprisal", "--stimuli", DATA / "stimuli.csv", "--vocab", v, "--merges", m,
                       "--lm", lm, "--beam-width", 5, "--convention", "both", "--out", work / "surprisal.csv"])
    step("regression", ["regress", "--surprisals", work / "surprisal.csv", "--stimuli", DATA / "stimuli.csv",
                        "--measurements", DATA / "measurements.csv", "--frequencies", DATA / "frequencies.csv",
                        "--seed", 7, "--out", work / "report"])

    report = json.loads((work / "report" / "report.json").read_text())
    for measure, by_conv in report["results"].items():
        for conv, cell in by_conv.items():
            best = min(cell, key=lambda s: cell[s].get("rank", 99))
            d = cell[best]["delta_r2"]
            print(f"{measure:<22} {conv:<9} best {best:<15} dR2 {d['mean']:+.4f} "
                  f"[{d['ci_low']:+.4f}, {d['ci_high']:+.4f}]  p {cell[best]['p_value']:.4f}")
    print(f"\nfull report: {work / 'report'}")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        target = Path(sys.argv[1])
        target.mkdir(parents=True, exist_ok=True)
        run(target)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            run(Path(tmp))
