import math
from pathlib import Path

import numpy as np
import pytest

from charsurprisal.bpe import BPECodec
from charsurprisal.lm import EnumeratedTokenLM, MarkovTokenLM

DATA = Path(__file__).resolve().parents[1] / "src" / "charsurprisal" / "data"

ANNE = "Anne lost control and laughed."

# focal yields of ROIs 2..5, transcribed by hand: spec -> (leading, trailing)
FOCAL_YIELDS = {
    "full": ([" lost", " control", " and", " laughed."], ["lost ", "control ", "and ", "laughed."]),
    "fixed:3": ([" lo", " co", " an", " la"], ["los", "con", "and", "lau"]),
    "dynamic:7": ([" lost", " cont", " an", " laug"], ["lost ", "contr", "and", "laugh"]),
    "dynamic:8": ([" lost", " contr", " and", " laugh"], ["lost ", "contro", "and ", "laughe"]),
    "lookahead:3": (
        [" lost co", " control an", " and la", " laughed."],
        ["lost con", "control and", "and lau", "laughed."],
    ),
    "lookahead:4": (
        [" lost con", " control and", " and lau", " laughed."],
        ["lost cont", "control and ", "and laug", "laughed."],
    ),
    "lookahead:5": (
        [" lost cont", " control and ", " and laug", " laughed."],
        ["lost contr", "control and l", "and laugh", "laughed."],
    ),
    "lookahead:6": (
        [" lost contr", " control and l", " and laugh", " laughed."],
        ["lost contro", "control and la", "and laughe", "laughed."],
    ),
    "lookahead:7": (
        [" lost contro", " control and la", " and laughe", " laughed."],
        ["lost control", "control and lau", "and laughed", "laughed."],
    ),
    "lookahead:full": (
        [" lost control", " control and", " and laughed.", " laughed."],
        ["lost control ", "control and ", "and laughed.", "laughed."],
    ),
}


@pytest.fixture
def toy_codec():
    # ids: a=0, b=1, ab=2
    return BPECodec(["a", "b", "ab"], [("a", "b")])


@pytest.fixture
def toy_lm():
    """Explicit distribution over token strings of the toy codec."""
    return EnumeratedTokenLM(
        3,
        {
            (0,): 0.1,  # "a"
            (2,): 0.15,  # "ab"
            (0, 1): 0.1,  # "ab" again
            (0, 1, 0): 0.05,  # "aba"
            (1,): 0.2,  # "b"
            (2, 0): 0.1,  # "aba"
            (0, 0): 0.1,  # "aa"
            (): 0.2,
        },
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_markov(rng, vocab_size, eos_weight=0.5):
    return MarkovTokenLM.random(vocab_size, rng, eos_weight=eos_weight)


def lse(values):
    values = [v for v in values if v > -math.inf]
    if not values:
        return -math.inf
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
