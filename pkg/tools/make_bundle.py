"""Regenerate the bundled demo data in src/charsurprisal/data/.

Everything here is synthetic and written from scratch: a small
probabilistic grammar produces the training corpus and the stimuli, word
counts come from the corpus, and reading measurements are simulated from
ROI length and frequency plus noise. The output is CC0.

    python3 tools/make_bundle.py
"""

import csv
import random
from collections import Counter
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "charsurprisal" / "data"
SEED = 20240611
CORPUS_BYTES = 50_000
N_STIMULI = 20
PARTICIPANTS = 4

NAMES = ["Anne", "Tom", "Mara", "Ben", "Lucy", "Omar", "Ida", "Paul", "Nina", "Sam"]
NOUNS = [
    "dog", "cat", "child", "farmer", "teacher", "river", "garden", "letter", "window",
    "table", "doctor", "bird", "horse", "road", "house", "storm", "book", "song",
    "market", "boat", "village", "friend", "lamp", "door", "field", "kitchen", "story",
]
ADJS = [
    "old", "small", "quiet", "bright", "heavy", "young", "tired", "green", "narrow",
    "warm", "strange", "little", "careful", "dark", "happy", "long",
]
VERBS_T = ["saw", "found", "opened", "carried", "watched", "painted", "lost", "followed", "read", "built"]
VERBS_I = ["laughed", "slept", "waited", "smiled", "left", "stopped", "worked", "sang", "fell", "listened"]
ADVS = ["slowly", "quickly", "again", "quietly", "early", "later", "alone", "together"]
PREPS = ["near", "behind", "under", "beside", "across", "inside", "past"]
CONJ = ["and", "but", "while", "because", "so"]
DETS = ["the", "a", "the", "the", "her", "his", "that"]


def np_(rng):
    if rng.random() < 0.2:
        return rng.choice(NAMES)
    words = [rng.choice(DETS)]
    if rng.random() < 0.45:
        words.append(rng.choice(ADJS))
    words.append(rng.choice(NOUNS))
    if words[0] == "a" and words[1][0] in "aeiou":
        words[0] = "an"
    return " ".join(words)


def vp(rng):
    if rng.random() < 0.55:
        out = f"{rng.choice(VERBS_T)} {np_(rng)}"
    else:
        out = rng.choice(VERBS_I)
    if rng.random() < 0.35:
        out += f" {rng.choice(PREPS)} {np_(rng)}"
    if rng.random() < 0.25:
        out += f" {rng.choice(ADVS)}"
    return out


def clause(rng):
    return f"{np_(rng)} {vp(rng)}"


def sentence(rng):
    s = clause(rng)
    if rng.random() < 0.4:
        s += f", {rng.choice(CONJ)} {clause(rng)}"
    s = s[0].upper() + s[1:]
    return s + rng.choice([".", ".", ".", "!", "?"] if "," not in s else [".", "."])


def main():
    rng = random.Random(SEED)
    corpus, size, seen = [], 0, set()
    while size < CORPUS_BYTES:
        s = sentence(rng)
        corpus.append(s)
        seen.add(s)
        size += len(s.encode()) + 1
    stimuli = []
    while len(stimuli) < N_STIMULI:
        s = sentence(rng)
        if s not in seen and len(s.split()) >= 6 and s not in stimuli:
            stimuli.append(s)
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "corpus.txt").write_text("\n".join(corpus) + "\n", encoding="utf-8")

    counts = Counter(w.lower() for line in corpus for w in line.split())
    with open(OUT / "frequencies.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word", "count"])
        for word, c in sorted(counts.items()):
            w.writerow([word, c])

    with open(OUT / "stimuli.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stimulus_id", "text"])
        for i, s in enumerate(stimuli, 1):
            w.writerow([f"s{i:02d}", s])

    with open(OUT / "measurements.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stimulus_id", "roi_index", "participant_id", "measure", "value"])
        for i, s in enumerate(stimuli, 1):
            for k, word in enumerate(s.split(), 1):
                rarity = -len(str(counts.get(word.lower(), 1)))
                for p in range(1, PARTICIPANTS + 1):
                    ffd = 170 + 4 * len(word) + 12 * rarity + rng.gauss(0, 25)
                    gaze = ffd + max(0.0, 9 * len(word) - 30 + rng.gauss(0, 30))
                    total_d = gaze + max(0.0, rng.gauss(20, 40))
                    skipped = rng.random() < max(0.02, 0.6 - 0.08 * len(word))
                    rows = [
                        ("FirstFixationDuration", round(ffd, 1)),
                        ("GazeDuration", round(gaze, 1)),
                        ("TotalDuration", round(total_d, 1)),
                        ("SkipRate", 1.0 if skipped else 0.0),
                    ]
                    for measure, value in rows:
                        w.writerow([f"s{i:02d}", k, f"p{p}", measure, value])
    print(f"{len(corpus)} corpus lines, {size} bytes; {len(stimuli)} stimuli")


if __name__ == "__main__":
    main()
