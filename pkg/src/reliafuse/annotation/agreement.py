"""Inter-annotator agreement and annotation quality scoring.

Kappa statistics are computed in exact rational arithmetic from integer
tallies and converted to float at the end, so textbook confusion tables
produce their exact textbook values. Degenerate tables (expected agreement
1) use the convention: kappa = 1 when observed agreement is also 1, else 0.

Multi-annotator kappa is the mean of pairwise Cohen kappas over each
pair's common items (Fleiss' kappa is available as an alternative mode).
Multi-label emotion agreement averages the 8 per-label binary kappas.
"""

from __future__ import annotations

import math
from collections import defaultdict
from fractions import Fraction
from itertools import combinations
from typing import Sequence

from ..labels import BIG_FIVE, EMOTIONS
from .records import AnnotationRecord, QualityReport


class NoOverlapError(ValueError):
    """No annotator pair shares any items."""


class DistributionError(ValueError):
    """Vote fractions do not form a probability distribution."""


# ----------------------------------------------------------------------
# Cohen's kappa


def _kappa_from_fractions(p_o: Fraction, p_e: Fraction) -> Fraction:
    if p_e == 1:
        return Fraction(1) if p_o == 1 else Fraction(0)
    return (p_o - p_e) / (1 - p_e)


def cohen_kappa_from_confusion(table: Sequence[Sequence[int]]) -> float:
    """Exact Cohen's kappa from an integer [rater A, rater B] confusion table."""
    k = len(table)
    n = sum(sum(row) for row in table)
    if n == 0:
        raise ValueError("empty confusion table")
    p_o = Fraction(sum(table[i][i] for i in range(k)), n)
    p_e = Fraction(0)
    for c in range(k):
        row_total = sum(table[c])
        col_total = sum(table[r][c] for r in range(k))
        p_e += Fraction(row_total, n) * Fraction(col_total, n)
    return float(_kappa_from_fractions(p_o, p_e))


def _pair_kappa_exact(labels_a: list, labels_b: list, classes: Sequence) -> Fraction:
    index = {c: i for i, c in enumerate(classes)}
    table = [[0] * len(classes) for _ in classes]
    for a, b in zip(labels_a, labels_b):
        table[index[a]][index[b]] += 1
    n = len(labels_a)
    p_o = Fraction(sum(table[i][i] for i in range(len(classes))), n)
    p_e = Fraction(0)
    for c in range(len(classes)):
        p_e += Fraction(sum(table[c]), n) * Fraction(
            sum(table[r][c] for r in range(len(classes))), n
        )
    return _kappa_from_fractions(p_o, p_e)


def _by_annotator(records: list[AnnotationRecord]) -> dict[str, dict[str, AnnotationRecord]]:
    grouped: dict[str, dict[str, AnnotationRecord]] = defaultdict(dict)
    for r in records:
        grouped[r.annotator_id][r.item_id] = r
    return grouped


def _pairwise_kappas(records: list[AnnotationRecord], field: str) -> list[Fraction]:
    grouped = _by_annotator(records)
    if len(grouped) < 2:
        raise ValueError(f"kappa needs >= 2 annotators, got {len(grouped)}")
    values: list[Fraction] = []
    for a, b in combinations(sorted(grouped), 2):
        common = sorted(set(grouped[a]) & set(grouped[b]))
        if not common:
            continue
        rec_a = [grouped[a][i] for i in common]
        rec_b = [grouped[b][i] for i in common]
        if field == "personality":
            values.append(
                _pair_kappa_exact(
                    [r.personality for r in rec_a],
                    [r.personality for r in rec_b],
                    BIG_FIVE,
                )
            )
        elif field == "emotion":
            per_label = []
            for label in EMOTIONS:
                per_label.append(
                    _pair_kappa_exact(
                        [label in r.emotions for r in rec_a],
                        [label in r.emotions for r in rec_b],
                        (True, False),
                    )
                )
            values.append(sum(per_label) / len(per_label))
        else:
            raise ValueError(f"unknown field {field!r}")
    if not values:
        raise NoOverlapError("no annotator pair shares any items")
    return values


def kappa(records: list[AnnotationRecord], field: str) -> float:
    """Mean pairwise Cohen's kappa over the records for one label field."""
    values = _pairwise_kappas(records, field)
    return float(sum(values) / len(values))


def corpus_kappa(records: list[AnnotationRecord], field: str = "both") -> float:
    """Headline agreement over a finalized corpus (mean of the two fields)."""
    if field in ("emotion", "personality"):
        return kappa(records, field)
    emo = _pairwise_kappas(records, "emotion")
    per = _pairwise_kappas(records, "personality")
    combined = sum(emo) / len(emo) + sum(per) / len(per)
    return float(combined / 2)


# ----------------------------------------------------------------------
# Fleiss' kappa (alternative multi-annotator mode)


def _fleiss_from_table(counts: list[list[int]]) -> Fraction:
    """Fleiss' kappa from an items x categories tally table (equal raters)."""
    n_items = len(counts)
    raters = sum(counts[0])
    if raters < 2:
        raise ValueError("Fleiss' kappa needs >= 2 ratings per item")
    p_bar = Fraction(0)
    for row in counts:
        if sum(row) != raters:
            raise ValueError("Fleiss' kappa requires equal ratings per item")
        agree = sum(c * (c - 1) for c in row)
        p_bar += Fraction(agree, raters * (raters - 1))
    p_bar /= n_items
    p_e = Fraction(0)
    total = n_items * raters
    for c in range(len(counts[0])):
        share = Fraction(sum(row[c] for row in counts), total)
        p_e += share * share
    return _kappa_from_fractions(p_bar, p_e)


def fleiss_kappa(records: list[AnnotationRecord], field: str) -> float:
    """Fleiss' kappa over items that every annotator labeled."""
    grouped = _by_annotator(records)
    if len(grouped) < 2:
        raise ValueError(f"kappa needs >= 2 annotators, got {len(grouped)}")
    common = set.intersection(*[set(items) for items in grouped.values()])
    if not common:
        raise NoOverlapError("no items shared by all annotators")
    items = sorted(common)
    if field == "personality":
        table = []
        for item in items:
            row = [0] * len(BIG_FIVE)
            for ann in grouped.values():
                row[BIG_FIVE.index(ann[item].personality)] += 1
            table.append(row)
        return float(_fleiss_from_table(table))
    if field == "emotion":
        per_label = []
        for label in EMOTIONS:
            table = []
            for item in items:
                yes = sum(1 for ann in grouped.values() if label in ann[item].emotions)
                table.append([yes, len(grouped) - yes])
            per_label.append(_fleiss_from_table(table))
        return float(sum(per_label) / len(per_label))
    raise ValueError(f"unknown field {field!r}")


# ----------------------------------------------------------------------
# entropy and the quality gate


def entropy_score(fractions: Sequence[float], n_classes: int) -> float:
    """Vote entropy normalized to [0, 1] by ln(n_classes); 0 ln 0 is 0."""
    if n_classes < 2:
        raise ValueError("entropy normalization needs >= 2 classes")
    total = float(sum(fractions))
    if any(f < 0 for f in fractions) or abs(total - 1.0) > 1e-9:
        raise DistributionError(f"vote fractions must be a distribution, got {fractions}")
    raw = -sum(f * math.log(f) for f in fractions if f > 0)
    return raw / math.log(n_classes)


def quality_score(
    kappa_value: float,
    entropy_norm: float,
    mean_confidence: float,
    weights: tuple[float, float, float] = (0.5, 0.25, 0.25),
    threshold: float = 0.7,
    entropy_as_certainty: bool = True,
) -> QualityReport:
    """Weighted quality score gated by `threshold`.

    By default the entropy term enters as certainty (1 - normalized
    entropy) so the score is monotone in annotation quality;
    ``entropy_as_certainty=False`` adds the raw entropy term instead.
    """
    a1, a2, a3 = weights
    if a1 < 0 or a2 < 0 or a3 < 0:
        raise ValueError("quality weights must be nonnegative")
    if abs((a1 + a2 + a3) - 1.0) > 1e-9:
        raise ValueError(f"quality weights must sum to 1, got {weights}")
    certainty = (1.0 - entropy_norm) if entropy_as_certainty else entropy_norm
    score = a1 * kappa_value + a2 * certainty + a3 * mean_confidence
    return QualityReport(
        kappa=kappa_value,
        entropy_norm=entropy_norm,
        mean_confidence=mean_confidence,
        score=score,
        threshold=threshold,
        passed=score >= threshold,
    )
