"""Finite, effective probability laws built from coded outcome streams.

A law records outcome counts over a fixed spectrum of labels together with
(epsilon, delta, n0) stability metadata.  The trial stream is chunked into
consecutive blocks of n0 trials; a law is declared stable when, for every
label, at least a (1 - delta) fraction of the complete blocks has a block
frequency within epsilon of the frequency pooled over all complete blocks.
The trailing partial block (and any partial block inherited from a merge)
never enters the verdict, so every judged block has the same sample size.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLawError, InsufficientBlocksError, UnknownLabelError
from .validation import check_in_unit_interval

DEFAULT_EPSILON = 0.02
DEFAULT_DELTA = 0.05
DEFAULT_BLOCK_SIZE = 10_000


@dataclass
class FactualLaw:
    """Relative-frequency law with block bookkeeping.

    Value-like: operations return new laws and never mutate their input.
    ``block_history`` holds one count map per block in trial order; a block
    is complete when its counts sum to ``block_size_n0``.
    """

    spectrum: tuple[str, ...]
    counts: dict[str, int]
    n_total: int
    block_size_n0: int
    epsilon: float
    delta: float
    block_history: list[dict[str, int]] = field(default_factory=list)

    def __post_init__(self):
        self.spectrum = tuple(self.spectrum)
        if len(set(self.spectrum)) != len(self.spectrum):
            raise ValueError("spectrum labels must be unique")
        if self.block_size_n0 < 1:
            raise ValueError("block_size_n0 must be a positive integer")
        self.epsilon = check_in_unit_interval(self.epsilon, "epsilon")
        self.delta = check_in_unit_interval(self.delta, "delta")
        known = set(self.spectrum)
        for label in self.counts:
            if label not in known:
                raise UnknownLabelError(f"count label {label!r} not in spectrum")
        if sum(self.counts.values()) != self.n_total:
            raise ValueError("counts must sum to n_total")
        in_blocks = sum(sum(b.values()) for b in self.block_history)
        if in_blocks != self.n_total:
            raise ValueError("block history must account for every trial")
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be non-negative")

    @classmethod
    def empty(cls, spectrum, epsilon=DEFAULT_EPSILON, delta=DEFAULT_DELTA,
              block_size_n0=DEFAULT_BLOCK_SIZE) -> "FactualLaw":
        spectrum = tuple(spectrum)
        return cls(spectrum, {lab: 0 for lab in spectrum}, 0,
                   block_size_n0, epsilon, delta, [])

    @classmethod
    def from_block_counts(cls, spectrum, blocks, epsilon=DEFAULT_EPSILON,
                          delta=DEFAULT_DELTA, block_size_n0=DEFAULT_BLOCK_SIZE
                          ) -> "FactualLaw":
        """Build a law directly from per-block count maps (fixture helper)."""
        spectrum = tuple(spectrum)
        blocks = [dict(b) for b in blocks]
        counts = {lab: 0 for lab in spectrum}
        for b in blocks:
            for lab, c in b.items():
                counts[lab] += c
        return cls(spectrum, counts, sum(counts.values()),
                   block_size_n0, epsilon, delta, blocks)

    def complete_blocks(self) -> list[dict[str, int]]:
        return [b for b in self.block_history
                if sum(b.values()) == self.block_size_n0]

    def index_of(self, label: str) -> int:
        try:
            return self.spectrum.index(label)
        except ValueError:
            raise UnknownLabelError(
                f"label {label!r} not in spectrum {self.spectrum}") from None


def accumulate(law: FactualLaw, outcome: str) -> FactualLaw:
    """Record one coded outcome; opens a fresh block when the current one fills."""
    law.index_of(outcome)
    counts = dict(law.counts)
    counts[outcome] += 1
    history = [dict(b) for b in law.block_history]
    if history and sum(history[-1].values()) < law.block_size_n0:
        history[-1][outcome] = history[-1].get(outcome, 0) + 1
    else:
        history.append({outcome: 1})
    return FactualLaw(law.spectrum, counts, law.n_total + 1,
                      law.block_size_n0, law.epsilon, law.delta, history)


def accumulate_indices(law: FactualLaw, indices: np.ndarray) -> FactualLaw:
    """Batch form of :func:`accumulate` for an array of spectrum indices.

    Equivalent to folding ``accumulate`` over the outcomes in order, but
    fills blocks with vectorized bincounts.
    """
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size == 0:
        return law
    n_labels = len(law.spectrum)
    if idx.min() < 0 or idx.max() >= n_labels:
        raise UnknownLabelError("outcome index outside spectrum")

    def block_map(chunk):
        c = np.bincount(chunk, minlength=n_labels)
        return {law.spectrum[i]: int(c[i]) for i in range(n_labels) if c[i]}

    history = [dict(b) for b in law.block_history]
    pos = 0
    if history and sum(history[-1].values()) < law.block_size_n0:
        room = law.block_size_n0 - sum(history[-1].values())
        head = idx[:room]
        for lab, c in block_map(head).items():
            history[-1][lab] = history[-1].get(lab, 0) + c
        pos = head.size
    while pos < idx.size:
        chunk = idx[pos:pos + law.block_size_n0]
        history.append(block_map(chunk))
        pos += chunk.size

    total = np.bincount(idx, minlength=n_labels)
    counts = dict(law.counts)
    for i, lab in enumerate(law.spectrum):
        counts[lab] += int(total[i])
    return FactualLaw(law.spectrum, counts, law.n_total + idx.size,
                      law.block_size_n0, law.epsilon, law.delta, history)


def frequencies(law: FactualLaw) -> dict[str, float]:
    """Relative frequencies count/n_total for every spectrum label."""
    if law.n_total == 0:
        raise EmptyLawError("cannot compute frequencies of an empty law")
    return {lab: law.counts[lab] / law.n_total for lab in law.spectrum}


def frequency_vector(law: FactualLaw) -> np.ndarray:
    if law.n_total == 0:
        raise EmptyLawError("cannot compute frequencies of an empty law")
    return np.array([law.counts[lab] for lab in law.spectrum], dtype=float) / law.n_total


@dataclass
class StabilityVerdict:
    stable: bool
    per_label_fraction_within_epsilon: dict[str, float]
    worst_deviation: float
    pooled_frequencies: dict[str, float]


def check_convergence(law: FactualLaw) -> StabilityVerdict:
    """Block-stability verdict: every label must keep at least a (1 - delta)
    fraction of complete blocks within epsilon of the pooled frequency."""
    blocks = law.complete_blocks()
    if len(blocks) < 2:
        raise InsufficientBlocksError(
            f"need at least 2 complete blocks, have {len(blocks)}")
    n0 = law.block_size_n0
    labels = law.spectrum
    table = np.array([[b.get(lab, 0) for lab in labels] for b in blocks],
                     dtype=float)
    block_freq = table / n0
    pooled = table.sum(axis=0) / (len(blocks) * n0)
    dev = np.abs(block_freq - pooled)
    within = (dev <= law.epsilon).mean(axis=0)
    fractions = {lab: float(within[i]) for i, lab in enumerate(labels)}
    stable = bool(np.all(within >= 1.0 - law.delta))
    return StabilityVerdict(
        stable=stable,
        per_label_fraction_within_epsilon=fractions,
        worst_deviation=float(dev.max()),
        pooled_frequencies={lab: float(pooled[i]) for i, lab in enumerate(labels)},
    )


def merge(a: FactualLaw, b: FactualLaw) -> FactualLaw:
    """Combine independently built partial laws: add counts, concatenate
    block histories.  Partial blocks may then sit mid-history; they are
    simply never judged, like a trailing partial block."""
    if a.spectrum != b.spectrum:
        raise ValueError("laws must share one spectrum to merge")
    if (a.block_size_n0, a.epsilon, a.delta) != (b.block_size_n0, b.epsilon, b.delta):
        raise ValueError("laws must share (epsilon, delta, n0) metadata to merge")
    counts = {lab: a.counts[lab] + b.counts[lab] for lab in a.spectrum}
    history = [dict(x) for x in a.block_history] + [dict(x) for x in b.block_history]
    return FactualLaw(a.spectrum, counts, a.n_total + b.n_total,
                      a.block_size_n0, a.epsilon, a.delta, history)


# --- serialization ---------------------------------------------------------

def to_csv(law: FactualLaw) -> str:
    """Flat CSV: one metadata header line, then (label, count) rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_total", "block_size_n0", "epsilon", "delta"])
    w.writerow([law.n_total, law.block_size_n0, repr(law.epsilon), repr(law.delta)])
    w.writerow(["label", "count"])
    for lab in law.spectrum:
        w.writerow([lab, law.counts[lab]])
    return buf.getvalue()


def from_csv(text: str) -> FactualLaw:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 3 or rows[0] != ["n_total", "block_size_n0", "epsilon", "delta"]:
        raise ValueError("malformed law CSV header")
    n_total, n0 = int(rows[1][0]), int(rows[1][1])
    eps, delta = float(rows[1][2]), float(rows[1][3])
    spectrum, counts = [], {}
    for lab, c in rows[3:]:
        spectrum.append(lab)
        counts[lab] = int(c)
    # flat format carries no block structure: store as one history entry
    history = [dict(counts)] if n_total else []
    return FactualLaw(tuple(spectrum), counts, n_total, n0, eps, delta, history)


def to_json_dict(law: FactualLaw) -> dict:
    return {
        "spectrum": list(law.spectrum),
        "counts": {lab: law.counts[lab] for lab in law.spectrum},
        "n_total": law.n_total,
        "block_size_n0": law.block_size_n0,
        "epsilon": law.epsilon,
        "delta": law.delta,
        "block_history": [dict(b) for b in law.block_history],
    }


def from_json_dict(doc: dict) -> FactualLaw:
    return FactualLaw(
        tuple(doc["spectrum"]),
        {str(k): int(v) for k, v in doc["counts"].items()},
        int(doc["n_total"]),
        int(doc["block_size_n0"]),
        float(doc["epsilon"]),
        float(doc["delta"]),
        [{str(k): int(v) for k, v in b.items()} for b in doc["block_history"]],
    )


def to_json(law: FactualLaw) -> str:
    return json.dumps(to_json_dict(law), sort_keys=True, indent=2) + "\n"


def from_json(text: str) -> FactualLaw:
    return from_json_dict(json.loads(text))
