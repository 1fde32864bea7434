"""Two-stage additivity testing of PMCs over compound applications.

A PMC is *additive* when (1) its readings are reproducible across repeated
runs of every base application and (2) its value for each compound
application matches the sum of the two base applications' mean values within
a percentage tolerance. Stage 1 guards stage 2: an irreproducible counter is
non-additive no matter how its sums come out.
"""

from __future__ import annotations

import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .core import AggregatedRun, CompoundRun, Dataset, RunRef

__all__ = [
    "INFINITE",
    "Classification",
    "PmcAdditivity",
    "AdditivityReport",
    "additivity_error",
    "run_additivity_test",
    "tolerance_sweep",
    "core_config_analysis",
    "report_to_csv",
    "report_to_json_dict",
]

#: Sentinel error for a zero base sum with a nonzero compound count: the
#: relative deviation has no finite value.
INFINITE = math.inf

#: Default stage-1 reproducibility bound: coefficient of variation across
#: repetition samples, matching the measurement methodology's 2.5% precision.
DEFAULT_REPRODUCIBILITY_COV = 0.025

_ENV_THREADS = "EMODEL_THREADS"


class Classification(str, Enum):
    ADDITIVE = "additive"
    NON_ADDITIVE = "non_additive"


@dataclass(frozen=True)
class PmcAdditivity:
    """Test outcome for one PMC."""

    pmc: str
    stage1_pass: bool
    max_error_pct: float
    classification: Classification

    def __post_init__(self) -> None:
        if self.max_error_pct < 0:
            raise ValueError(f"max_error_pct must be >= 0, got {self.max_error_pct!r}")


@dataclass(frozen=True)
class AdditivityReport:
    """Per-PMC verdicts at one tolerance, plus an error ranking.

    ``ranking`` lists every PMC ordered by max_error_pct ascending, ties
    broken by name; infinite errors sort last.
    """

    tolerance_pct: float
    per_pmc: tuple[PmcAdditivity, ...]
    ranking: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_pmc", tuple(self.per_pmc))
        object.__setattr__(self, "ranking", tuple(self.ranking))
        if sorted(self.ranking) != sorted(e.pmc for e in self.per_pmc):
            raise ValueError("ranking is not a permutation of the tested PMC names")

    def entry(self, pmc: str) -> PmcAdditivity:
        for e in self.per_pmc:
            if e.pmc == pmc:
                return e
        raise KeyError(f"PMC {pmc!r} not in report")

    def additive_names(self) -> tuple[str, ...]:
        return tuple(e.pmc for e in self.per_pmc if e.classification is Classification.ADDITIVE)


def additivity_error(base_sum: float, compound: float) -> float:
    """Percent deviation of a compound count from the sum of its base counts.

    Returns :data:`INFINITE` when the base sum is zero but the compound count
    is not; 0.0 when both are zero.
    """
    if base_sum < 0 or compound < 0:
        raise ValueError(
            f"counts must be non-negative, got base_sum={base_sum!r}, compound={compound!r}"
        )
    if base_sum == 0:
        return 0.0 if compound == 0 else INFINITE
    return abs(compound - base_sum) / base_sum * 100.0


def _classify(stage1_pass: bool, max_error_pct: float, tolerance_pct: float) -> Classification:
    if stage1_pass and max_error_pct <= tolerance_pct:
        return Classification.ADDITIVE
    return Classification.NON_ADDITIVE


def _group_cov(values: Sequence[float]) -> float:
    """Coefficient of variation of one PMC across one group's repetitions.

    Counts are non-negative, so a zero mean forces all-zero samples; that is
    perfect reproducibility, not an undefined ratio.
    """
    mean = math.fsum(values) / len(values)
    if mean == 0:
        return 0.0
    return statistics.stdev(values) / mean


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        try:
            threads = int(os.environ.get(_ENV_THREADS, "1"))
        except ValueError:
            threads = 1
    return max(1, threads)


def run_additivity_test(
    dataset: Dataset,
    compounds: Sequence[CompoundRun] | None = None,
    tolerance_pct: float = 5.0,
    *,
    reproducibility_cov: float = DEFAULT_REPRODUCIBILITY_COV,
    threads: int | None = None,
) -> AdditivityReport:
    """Run both test stages for every PMC of the dataset.

    Stage 1 passes a PMC when its coefficient of variation is at most
    ``reproducibility_cov`` in every run group with >= 2 repetition samples.
    Stage 2 compares each compound count against the sum of the two base
    groups' repetition means; ``max_error_pct`` is the maximum over all
    compounds (0.0 when there are none). A PMC is additive iff it passes
    stage 1 and its maximum error does not exceed ``tolerance_pct``.

    Per-PMC work may run on ``threads`` worker threads (default: the
    EMODEL_THREADS environment variable, else serial); the report is
    identical regardless.
    """
    if not (tolerance_pct > 0):
        raise ValueError(f"tolerance_pct must be > 0, got {tolerance_pct!r}")
    if not (reproducibility_cov >= 0):
        raise ValueError(f"reproducibility_cov must be >= 0, got {reproducibility_cov!r}")
    if compounds is None:
        compounds = dataset.compounds

    groups = dataset.groups()
    means: dict[RunRef, AggregatedRun] = {p.ref: p for p in dataset.points()}
    for comp in compounds:
        if comp.pmc.names != dataset.pmc_names:
            raise ValueError(
                f"compound {comp.compound_id!r} PMC names do not match the dataset"
            )
        for ref in (comp.base_a, comp.base_b):
            if ref not in means:
                raise ValueError(
                    f"compound {comp.compound_id!r} references unknown base {ref.label()!r}"
                )

    repetition_groups = [runs for runs in groups.values() if len(runs) >= 2]

    def test_one(index: int) -> PmcAdditivity:
        name = dataset.pmc_names[index]
        stage1 = all(
            _group_cov([r.pmc.counts[index] for r in runs]) <= reproducibility_cov
            for runs in repetition_groups
        )
        max_error = 0.0
        for comp in compounds:
            base_sum = means[comp.base_a].pmc.counts[index] + means[comp.base_b].pmc.counts[index]
            max_error = max(max_error, additivity_error(base_sum, comp.pmc.counts[index]))
        return PmcAdditivity(name, stage1, max_error, _classify(stage1, max_error, tolerance_pct))

    indices = range(len(dataset.pmc_names))
    workers = _resolve_threads(threads)
    if workers > 1 and len(dataset.pmc_names) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_pmc = tuple(pool.map(test_one, indices))
    else:
        per_pmc = tuple(test_one(i) for i in indices)

    ranking = tuple(e.pmc for e in sorted(per_pmc, key=lambda e: (e.max_error_pct, e.pmc)))
    return AdditivityReport(tolerance_pct=tolerance_pct, per_pmc=per_pmc, ranking=ranking)


def tolerance_sweep(
    report: AdditivityReport, tolerances: Sequence[float]
) -> list[tuple[float, int]]:
    """Count additive PMCs at each tolerance, reusing the report's raw errors.

    Tolerances must be positive and ascending; the counts are then
    monotonically non-decreasing.
    """
    if not tolerances:
        raise ValueError("tolerances must be non-empty")
    previous = 0.0
    for t in tolerances:
        if not (t > 0):
            raise ValueError(f"tolerances must be positive, got {t!r}")
        if t < previous:
            raise ValueError(f"tolerances must be ascending, got {list(tolerances)}")
        previous = t
    return [
        (
            t,
            sum(
                1
                for e in report.per_pmc
                if _classify(e.stage1_pass, e.max_error_pct, t) is Classification.ADDITIVE
            ),
        )
        for t in tolerances
    ]


def core_config_analysis(
    datasets: Sequence[tuple[int, Dataset]], tolerance_pct: float = 5.0
) -> list[tuple[int, int]]:
    """Count non-additive PMCs per core configuration.

    Each entry pairs a core count with a dataset (compounds included) measured
    at that configuration; all datasets must cover the same PMC name set.
    Returns (cores, non_additive_count) in input order, ready for CSV export.
    """
    if not datasets:
        raise ValueError("need at least one (cores, dataset) configuration")
    reference = set(datasets[0][1].pmc_names)
    for cores, ds in datasets:
        if set(ds.pmc_names) != reference:
            raise ValueError(
                f"configuration with cores={cores} has a different PMC name set"
            )
    out = []
    for cores, ds in datasets:
        report = run_additivity_test(ds, ds.compounds, tolerance_pct)
        non_additive = sum(
            1 for e in report.per_pmc if e.classification is Classification.NON_ADDITIVE
        )
        out.append((cores, non_additive))
    return out


def _error_text(value: float) -> str:
    return "inf" if math.isinf(value) else repr(value)


def report_to_csv(report: AdditivityReport) -> str:
    """Serialize a report as ``pmc,stage1,max_error_pct,classification`` rows."""
    lines = ["pmc,stage1,max_error_pct,classification"]
    for e in report.per_pmc:
        stage1 = "true" if e.stage1_pass else "false"
        lines.append(f"{e.pmc},{stage1},{_error_text(e.max_error_pct)},{e.classification.value}")
    return "\n".join(lines) + "\n"


def report_to_json_dict(report: AdditivityReport) -> dict:
    """JSON-ready form of a report; infinite errors become the string "inf"."""
    return {
        "tolerance_pct": report.tolerance_pct,
        "per_pmc": [
            {
                "pmc": e.pmc,
                "stage1": e.stage1_pass,
                "max_error_pct": "inf" if math.isinf(e.max_error_pct) else e.max_error_pct,
                "classification": e.classification.value,
            }
            for e in report.per_pmc
        ],
        "ranking": list(report.ranking),
    }
