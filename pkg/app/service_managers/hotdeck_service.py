"""
Hot Deck Service Manager - donor matching on margined variables
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.constants.enums import Provenance
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import ImputationError
from app.models.frame import CompletedDataset
from app.schemas.imputation import DatasetReport
from app.utils import run_parallel, substream

Pattern = Tuple[float, ...]

EXACT = "exact"
ANY = "any"


@dataclass(frozen=True)
class DonorIndex:
    """Respondent row indices grouped by their values of the matching variables"""

    names: Tuple[str, ...]
    buckets: Dict[Pattern, np.ndarray]

    def lookup(self, pattern: Pattern) -> np.ndarray:
        return self.buckets.get(tuple(pattern), np.empty(0, dtype=int))

    @property
    def size(self) -> int:
        return sum(len(rows) for rows in self.buckets.values())


class HotDeckService:
    def build_index(self, dataset: CompletedDataset, names: Sequence[str]) -> DonorIndex:
        """Partition respondents by their pattern over names"""
        respondents = np.flatnonzero(dataset.frame.respondents)
        if names:
            columns = np.column_stack([dataset.column(name)[respondents] for name in names])
        else:
            columns = np.empty((len(respondents), 0))
        buckets: Dict[Pattern, List[int]] = {}
        for row, values in zip(respondents, columns):
            buckets.setdefault(tuple(float(v) for v in values), []).append(int(row))
        return DonorIndex(
            names=tuple(names),
            buckets={key: np.asarray(rows, dtype=int) for key, rows in buckets.items()},
        )

    def impute_dataset(
        self,
        dataset: CompletedDataset,
        margined: Sequence[str],
        rng: np.random.Generator,
        weighted_donors: bool = False,
        report: Optional[DatasetReport] = None,
    ) -> CompletedDataset:
        """
        Give every unit nonrespondent the unmargined values of one donor.

        Donors share the nonrespondent's margined pattern; an empty bucket
        drops margined variables from the end one at a time, and finally
        any respondent qualifies.
        """
        frame = dataset.frame
        nonrespondents = np.flatnonzero(frame.unit_nr)
        if not nonrespondents.size:
            return dataset
        if not frame.respondents.any():
            raise ImputationError(ERROR_MESSAGES["NO_DONORS"])

        # Ladder of indices: full pattern first, empty pattern last
        ladder = [self.build_index(dataset, margined[:k]) for k in range(len(margined), -1, -1)]
        labels = [EXACT] + [f"drop_{d}" for d in range(1, len(margined))] + [ANY]
        if not margined:
            labels = [ANY]
        counts = {label: 0 for label in labels}

        weights = frame.design_weights
        patterns = [dataset.column(name) for name in margined]
        donors = np.empty(len(nonrespondents), dtype=int)
        for position, row in enumerate(nonrespondents):
            pattern = tuple(float(column[row]) for column in patterns)
            for index, label in zip(ladder, labels):
                bucket = index.lookup(pattern[: len(index.names)])
                if bucket.size:
                    break
            if weighted_donors:
                donor = rng.choice(bucket, p=weights[bucket] / weights[bucket].sum())
            else:
                donor = bucket[rng.integers(bucket.size)]
            donors[position] = donor
            counts[label] += 1

        fallbacks = {k: v for k, v in counts.items() if k != EXACT and v}
        if margined and fallbacks:
            logger.warning(f"Hot deck fallbacks: {fallbacks}")
        if report is not None:
            for label, count in counts.items():
                if count:
                    report.hotdeck_fallbacks[label] = report.hotdeck_fallbacks.get(label, 0) + count

        columns = [j for j, spec in enumerate(frame.schema) if spec.name not in margined]
        if not columns:
            return dataset
        block = dataset.values[np.ix_(donors, columns)]
        return dataset.with_block(nonrespondents, columns, block, Provenance.UNIT_IMPUTED)

    def hotdeck_impute(
        self,
        datasets: Sequence[CompletedDataset],
        margined: Sequence[str],
        seed: int,
        threads: int = 1,
        weighted_donors: bool = False,
        reports: Optional[List[DatasetReport]] = None,
    ) -> List[CompletedDataset]:
        """Per-dataset hot deck; dataset l draws from the substream ("hotdeck", l)"""

        def run(index: int) -> CompletedDataset:
            report = reports[index - 1] if reports is not None else None
            return self.impute_dataset(
                datasets[index - 1],
                margined,
                substream(seed, "hotdeck", index),
                weighted_donors,
                report,
            )

        logger.info(f"Hot deck on {len(datasets)} datasets, matching on {list(margined)}")
        return run_parallel(run, range(1, len(datasets) + 1), threads)

    def resample_records(
        self, dataset: CompletedDataset, rng: np.random.Generator
    ) -> CompletedDataset:
        """Whole-record resampling with replacement for every unit nonrespondent"""
        return self.impute_dataset(dataset, (), rng)


# Global instance
hotdeck = HotDeckService()
