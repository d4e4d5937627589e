"""Loading stimuli, reading measurements and word frequencies.

File schemas (UTF-8 CSV with a header row):

* stimuli: ``stimulus_id,text``
* measurements: ``stimulus_id,roi_index[,participant_id],measure,value``
* frequencies: ``word,count``
* explicit ROIs (optional): ``stimulus_id,roi_index,start,end`` with
  1-based half-open character intervals
"""

from __future__ import annotations

import csv
import enum
import math
import re
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .text import Convention, Interval, ROISequence, Stimulus, segment_rois

__all__ = [
    "DataError",
    "DatasetBundle",
    "FrequencyTable",
    "Measure",
    "MeasurementRecord",
    "average_participants",
    "load_dataset",
    "load_frequencies",
    "load_measurements",
    "load_stimuli",
    "skip_first_roi",
    "zipf_frequency",
]

_SPACE = re.compile(r"\s+")


class DataError(ValueError):
    pass


class Measure(str, enum.Enum):
    FIRST_FIXATION = "FirstFixationDuration"
    GAZE = "GazeDuration"
    TOTAL = "TotalDuration"
    SKIP_RATE = "SkipRate"


@dataclass(frozen=True)
class MeasurementRecord:
    stimulus_id: str
    roi_index: int
    measure: Measure
    value: float
    participant_id: Optional[str] = None
    excluded: bool = False


@dataclass(frozen=True)
class FrequencyTable:
    counts: dict
    total: int

    def __post_init__(self):
        if any(c <= 0 for c in self.counts.values()):
            raise DataError("frequency counts must be positive")
        if self.counts and self.total < max(self.counts.values()):
            raise DataError("total token count is smaller than a single word count")
        if self.total <= 0:
            raise DataError("total token count must be positive")

    @classmethod
    def from_counts(cls, counts, total=None):
        counts = {str(w): int(c) for w, c in counts.items()}
        return cls(counts, int(total) if total is not None else sum(counts.values()))

    @classmethod
    def from_texts(cls, texts: Iterable[str], lowercase=True):
        """Count whitespace-separated words (punctuation kept)."""
        counts = Counter()
        for t in texts:
            for w in t.split():
                counts[w.lower() if lowercase else w] += 1
        return cls.from_counts(counts)

    def count(self, word: str) -> int:
        return self.counts.get(word, 0)


def normalize_word(text: str, lowercase=True) -> str:
    text = _SPACE.sub("", text)
    return text.lower() if lowercase else text


def zipf_frequency(table: FrequencyTable, roi_yield: str, lowercase=True, floor=1) -> float:
    """Base-10 log of occurrences per billion words, whitespace stripped.

    Out-of-vocabulary words count as ``floor`` occurrences.
    """
    count = table.count(normalize_word(roi_yield, lowercase))
    return math.log10(max(count, floor) / table.total * 1e9)


@dataclass(frozen=True)
class DatasetBundle:
    stimuli: dict
    rois: dict  # convention -> {stimulus_id: ROISequence}
    measurements: tuple
    frequencies: Optional[FrequencyTable] = None
    warnings: tuple = field(default=())

    @property
    def analyzable(self):
        return [m for m in self.measurements if not m.excluded]


def _read_csv(path, required, optional=()):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}; header is {header}")
        unknown = [c for c in header if c not in required and c not in optional]
        if unknown:
            raise DataError(f"{path}: unexpected column(s) {', '.join(unknown)}")
        for rowno, row in enumerate(reader, start=2):
            yield rowno, row, header


def load_stimuli(path) -> dict:
    stimuli = {}
    for rowno, row, _ in _read_csv(path, ("stimulus_id", "text")):
        sid = row["stimulus_id"]
        if sid in stimuli:
            raise DataError(f"{path}:{rowno}: duplicate stimulus_id {sid!r}")
        try:
            stimuli[sid] = Stimulus(sid, row["text"])
        except ValueError as exc:
            raise DataError(f"{path}:{rowno}: {exc}") from exc
    return stimuli


def load_frequencies(path) -> FrequencyTable:
    counts = {}
    for rowno, row, _ in _read_csv(path, ("word", "count")):
        try:
            c = int(row["count"])
        except ValueError:
            raise DataError(f"{path}:{rowno}: non-integer count {row['count']!r}") from None
        if c <= 0:
            raise DataError(f"{path}:{rowno}: count must be positive")
        counts[row["word"]] = counts.get(row["word"], 0) + c
    return FrequencyTable.from_counts(counts)


def load_rois(path, stimuli) -> dict:
    spans = defaultdict(dict)
    for rowno, row, _ in _read_csv(path, ("stimulus_id", "roi_index", "start", "end")):
        sid = row["stimulus_id"]
        if sid not in stimuli:
            raise DataError(f"{path}:{rowno}: unknown stimulus_id {sid!r}")
        try:
            k, start, end = int(row["roi_index"]), int(row["start"]), int(row["end"])
            spans[sid][k] = Interval(start, end)
        except ValueError as exc:
            raise DataError(f"{path}:{rowno}: {exc}") from exc
    out = {}
    for sid, by_k in spans.items():
        if sorted(by_k) != list(range(1, len(by_k) + 1)):
            raise DataError(f"{path}: ROI indices of {sid!r} are not 1..K")
        try:
            out[sid] = ROISequence(stimuli[sid], [by_k[k] for k in sorted(by_k)])
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc
    return out


def load_measurements(path, roi_counts: dict) -> list:
    """Parse and validate measurement rows against the ROI count of each stimulus."""
    records = []
    has_participant = None
    seen = set()
    for rowno, row, header in _read_csv(
        path, ("stimulus_id", "roi_index", "measure", "value"), ("participant_id",)
    ):
        has_participant = "participant_id" in header
        sid = row["stimulus_id"]
        if sid not in roi_counts:
            raise DataError(f"{path}:{rowno}: unknown stimulus_id {sid!r}")
        try:
            k = int(row["roi_index"])
        except ValueError:
            raise DataError(f"{path}:{rowno}: non-integer roi_index {row['roi_index']!r}") from None
        if not 1 <= k <= roi_counts[sid]:
            raise DataError(
                f"{path}:{rowno}: roi_index {k} out of range for {sid!r} with {roi_counts[sid]} ROIs"
            )
        try:
            measure = Measure(row["measure"])
        except ValueError:
            raise DataError(f"{path}:{rowno}: unknown measure {row['measure']!r}") from None
        try:
            value = float(row["value"])
        except ValueError:
            raise DataError(f"{path}:{rowno}: non-numeric value {row['value']!r}") from None
        if not math.isfinite(value):
            raise DataError(f"{path}:{rowno}: value must be finite")
        if measure is Measure.SKIP_RATE and not 0.0 <= value <= 1.0:
            raise DataError(f"{path}:{rowno}: skip rate {value} outside [0, 1]")
        pid = row.get("participant_id") if has_participant else None
        key = (sid, k, measure, pid)
        if key in seen:
            raise DataError(f"{path}:{rowno}: duplicate row for {sid!r}, ROI {k}, {measure.value}")
        seen.add(key)
        records.append(MeasurementRecord(sid, k, measure, value, pid))
    return records


def average_participants(records) -> list:
    """Mean value per (stimulus, ROI, measure); participant ids are dropped."""
    groups = defaultdict(list)
    for r in records:
        groups[(r.stimulus_id, r.roi_index, r.measure)].append(r.value)
    return [
        MeasurementRecord(sid, k, m, math.fsum(vals) / len(vals))
        for (sid, k, m), vals in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value))
    ]


def skip_first_roi(bundle: DatasetBundle) -> DatasetBundle:
    """Mark measurements of each stimulus's first ROI as excluded."""
    notes = list(bundle.warnings)
    any_rois = next(iter(bundle.rois.values()), {})
    for sid, rois in sorted(any_rois.items()):
        if len(rois) == 1:
            msg = f"stimulus {sid!r} has a single ROI; no rows remain after skipping it"
            if msg not in notes:
                warnings.warn(msg)
                notes.append(msg)
    measurements = tuple(
        replace(m, excluded=True) if m.roi_index == 1 and not m.excluded else m
        for m in bundle.measurements
    )
    return replace(bundle, measurements=measurements, warnings=tuple(notes))


def load_dataset(
    stimuli_path,
    measurements_path,
    convention=("leading", "trailing"),
    frequencies_path=None,
    rois_path=None,
) -> DatasetBundle:
    """Load a bundle: stimuli, per-convention ROIs, averaged measurements.

    ``convention`` is one convention or a sequence of them. With
    ``rois_path`` the explicit ROI table replaces whitespace segmentation
    for every requested convention label. The first ROI of each stimulus is
    marked excluded.
    """
    if isinstance(convention, (str, Convention)):
        convention = (convention,)
    conventions = [Convention.parse(c) for c in convention]
    stimuli = load_stimuli(stimuli_path)
    if rois_path is not None:
        explicit = load_rois(rois_path, stimuli)
        missing = sorted(set(stimuli) - set(explicit))
        if missing:
            raise DataError(f"{rois_path}: no ROIs for stimuli {missing}")
        rois = {c: dict(explicit) for c in conventions}
    else:
        rois = {c: {sid: segment_rois(s, c) for sid, s in stimuli.items()} for c in conventions}
    counts = {sid: len(r) for sid, r in next(iter(rois.values())).items()}
    records = load_measurements(measurements_path, counts)
    if any(r.participant_id is not None for r in records):
        records = average_participants(records)
    freq = load_frequencies(frequencies_path) if frequencies_path is not None else None
    bundle = DatasetBundle(stimuli, rois, tuple(records), freq)
    return skip_first_roi(bundle)
