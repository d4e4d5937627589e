"""Walk through ROI segmentation and focal areas on one sentence.

Run: python3 demos/focal_areas.py
"""

from charsurprisal.text import DEFAULT_SPECS, Stimulus, focal_area, segment_rois

SENTENCE = "Anne lost control and laughed."


def show(convention):
    rois = segment_rois(Stimulus("anne", SENTENCE), convention)
    print(f"\n{convention} convention: whitespace goes with the {'next' if convention == 'leading' else 'previous'} word")
    print("  ROIs:", " | ".join(repr(rois.yield_of(k)) for k in range(1, len(rois) + 1)))
    width = max(len(s.label) for s in DEFAULT_SPECS)
    for spec in DEFAULT_SPECS:
        cells = []
        for k in range(2, len(rois) + 1):
            area = focal_area(rois, k, spec)
            cells.append("<missing>" if area is None else repr(rois.stimulus.yield_of(area.interval)))
        print(f"  {spec.label:<{width}}  " + "  ".join(f"{c:<18}" for c in cells))


if __name__ == "__main__":
    print(f"Sentence: {SENTENCE!r}")
    print("ROI 1 has no preceding context, so its focal areas are never computed.")
    show("leading")
    show("trailing")
    print("\nfixed:n takes the first n characters of the ROI; dynamic:s ends the area")
    print("s characters past the expected landing position; lookahead:n runs n")
    print("characters into the next ROI.")
