"""Stimuli, regions of interest and focal areas.

Character positions are 1-based and intervals are half-open, so ``[i, j)``
covers characters ``i .. j-1`` of the stimulus and ``j`` may be ``N + 1``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

__all__ = [
    "Convention",
    "FocalArea",
    "FocalKind",
    "FocalSpec",
    "Interval",
    "InvalidStimulusError",
    "ROISequence",
    "SkippedRegionError",
    "Stimulus",
    "DEFAULT_SPECS",
    "focal_area",
    "focal_table",
    "parse_specs",
    "segment_rois",
]

_WORD = re.compile(r"\S+")


class InvalidStimulusError(ValueError):
    pass


class SkippedRegionError(ValueError):
    """Raised when a focal area is requested for the first ROI of a stimulus."""


@dataclass(frozen=True)
class Stimulus:
    id: str
    text: str

    def __post_init__(self):
        if not self.text:
            raise InvalidStimulusError(f"stimulus {self.id!r} is empty")

    def __len__(self) -> int:
        return len(self.text)

    def yield_of(self, interval: "Interval") -> str:
        if interval.end > len(self.text) + 1:
            raise IndexError(f"{interval} exceeds stimulus of length {len(self.text)}")
        return self.text[interval.start - 1 : interval.end - 1]


@dataclass(frozen=True, order=True)
class Interval:
    start: int
    end: int

    def __post_init__(self):
        if not (1 <= self.start < self.end):
            raise ValueError(f"invalid interval [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "Interval") -> bool:
        # closed-boundary overlap, as required of a focal area and its ROI
        return other.start <= self.end and self.start <= other.end

    def __str__(self) -> str:
        return f"[{self.start}, {self.end})"


class Convention(str, enum.Enum):
    LEADING = "leading"
    TRAILING = "trailing"

    @classmethod
    def parse(cls, value) -> "Convention":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown whitespace convention {value!r}") from None


@dataclass(frozen=True)
class ROISequence:
    stimulus: Stimulus
    regions: tuple
    convention: Optional[Convention] = None

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions:
            raise InvalidStimulusError("an ROI sequence needs at least one region")
        pos = 1
        for r in self.regions:
            if r.start != pos:
                raise InvalidStimulusError(
                    f"regions of {self.stimulus.id!r} are not segmentative at {r}"
                )
            pos = r.end
        if pos != len(self.stimulus) + 1:
            raise InvalidStimulusError(
                f"regions of {self.stimulus.id!r} stop at {pos}, stimulus has "
                f"{len(self.stimulus)} characters"
            )

    def __len__(self) -> int:
        return len(self.regions)

    def region(self, k: int) -> Interval:
        """The ``k``-th region, 1-based."""
        if not 1 <= k <= len(self.regions):
            raise IndexError(f"ROI index {k} out of range 1..{len(self.regions)}")
        return self.regions[k - 1]

    def yield_of(self, k: int) -> str:
        return self.stimulus.yield_of(self.region(k))

    def yields(self) -> list:
        return [self.stimulus.yield_of(r) for r in self.regions]


def segment_rois(stimulus: Stimulus, convention) -> ROISequence:
    """Split a stimulus into whitespace-delimited, segmentative ROIs.

    Whitespace runs attach as a block to the following region under the
    leading convention and to the preceding one under the trailing
    convention. Whitespace before the first word always stays with the first
    region and whitespace after the last word with the last region.
    """
    convention = Convention.parse(convention)
    words = [(m.start(), m.end()) for m in _WORD.finditer(stimulus.text)]
    if not words:
        raise InvalidStimulusError(f"stimulus {stimulus.id!r} has no non-whitespace character")
    n = len(stimulus.text)
    # 0-based cut points between consecutive regions
    if convention is Convention.LEADING:
        cuts = [words[k][1] for k in range(len(words) - 1)]
    else:
        cuts = [words[k + 1][0] for k in range(len(words) - 1)]
    bounds = [0] + cuts + [n]
    regions = [Interval(a + 1, b + 1) for a, b in zip(bounds, bounds[1:])]
    return ROISequence(stimulus, regions, convention)


class FocalKind(str, enum.Enum):
    FULL = "full"
    FIXED = "fixed"
    DYNAMIC = "dynamic"
    LOOKAHEAD = "lookahead"
    LOOKAHEAD_FULL = "lookahead-full"


@dataclass(frozen=True)
class FocalSpec:
    kind: FocalKind
    n: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FocalKind(self.kind))
        sized = self.kind in (FocalKind.FIXED, FocalKind.DYNAMIC, FocalKind.LOOKAHEAD)
        if sized:
            if self.n is None or int(self.n) < 1:
                raise ValueError(f"{self.kind.value} focal area needs a size >= 1, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
        elif self.n is not None:
            raise ValueError(f"{self.kind.value} focal area takes no size")

    @classmethod
    def full(cls):
        return cls(FocalKind.FULL)

    @classmethod
    def fixed(cls, n=3):
        return cls(FocalKind.FIXED, n)

    @classmethod
    def dynamic(cls, s):
        return cls(FocalKind.DYNAMIC, s)

    @classmethod
    def lookahead(cls, n):
        return cls(FocalKind.LOOKAHEAD, n)

    @classmethod
    def lookahead_full(cls):
        return cls(FocalKind.LOOKAHEAD_FULL)

    @classmethod
    def parse(cls, text: str) -> "FocalSpec":
        """Parse ``full``, ``fixed:3``, ``dynamic:7``, ``lookahead:5`` or ``lookahead:full``."""
        head, _, arg = text.strip().lower().partition(":")
        if head == "full" and not arg:
            return cls.full()
        if head == "lookahead" and arg == "full":
            return cls.lookahead_full()
        if head in ("fixed", "dynamic", "lookahead") and arg.isdigit():
            return cls(FocalKind(head), int(arg))
        raise ValueError(f"cannot parse focal spec {text!r}")

    @property
    def label(self) -> str:
        if self.kind is FocalKind.FULL:
            return "full"
        if self.kind is FocalKind.LOOKAHEAD_FULL:
            return "lookahead:full"
        return f"{self.kind.value}:{self.n}"

    def __str__(self) -> str:
        return self.label


def parse_specs(text: str) -> list:
    return [FocalSpec.parse(part) for part in text.split(",") if part.strip()]


# the ten focal areas of the 2-by-10 design, in table order
DEFAULT_SPECS = tuple(
    parse_specs(
        "full,fixed:3,dynamic:7,dynamic:8,lookahead:3,lookahead:4,"
        "lookahead:5,lookahead:6,lookahead:7,lookahead:full"
    )
)


@dataclass(frozen=True)
class FocalArea:
    interval: Interval
    roi_index: int

    @property
    def start(self) -> int:
        return self.interval.start

    @property
    def end(self) -> int:
        return self.interval.end


def _dynamic_size(prev_len: int, span: int) -> int:
    # fixation lands on the preferred viewing location of the previous ROI;
    # the span counts characters to its right, the first of which is the
    # fixated character itself (hence the +1; this reproduces the table)
    viewing = math.ceil(prev_len / 2) - 1
    return max(0, viewing + span + 1 - prev_len)


def focal_area(rois: ROISequence, k: int, spec: FocalSpec) -> Optional[FocalArea]:
    """Focal area of the ``k``-th ROI (1-based), or ``None`` when it would be empty."""
    if not isinstance(k, int) or k < 1 or k > len(rois):
        raise IndexError(f"ROI index {k} out of range 1..{len(rois)}")
    if k == 1:
        raise SkippedRegionError("the first ROI of a stimulus has no focal area")
    roi = rois.region(k)
    n_chars = len(rois.stimulus)
    kind = spec.kind
    if kind is FocalKind.FULL:
        start, end = roi.start, roi.end
    elif kind is FocalKind.FIXED:
        start, end = roi.start, roi.start + min(len(roi), spec.n)
    elif kind is FocalKind.DYNAMIC:
        size = min(len(roi), _dynamic_size(len(rois.region(k - 1)), spec.n))
        if size == 0:
            return None
        start, end = roi.start, roi.start + size
    elif kind is FocalKind.LOOKAHEAD:
        start, end = roi.start, min(roi.end + spec.n, n_chars + 1)
    else:
        start = roi.start
        end = rois.region(k + 1).end if k < len(rois) else roi.end
    return FocalArea(Interval(start, end), k)


def focal_table(rois: ROISequence, specs: Sequence[FocalSpec]) -> dict:
    """Map each spec to the focal yields of ROIs ``2..K`` (``None`` where missing)."""
    table = {}
    for spec in specs:
        row = []
        for k in range(2, len(rois) + 1):
            area = focal_area(rois, k, spec)
            row.append(None if area is None else rois.stimulus.yield_of(area.interval))
        table[spec] = row
    return table
