"""
Random substreams, categorical draws and ordered parallel fan-out
"""
import asyncio
import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar, Union

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

Label = Union[str, int]


def _label_key(label: Label) -> int:
    """Stable non-negative integer for a substream label"""
    if isinstance(label, (int, np.integer)):
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def substream_label(*labels: Label) -> str:
    """Human-readable name of a substream, recorded in run reports"""
    return "/".join(str(label) for label in labels)


def substream(seed: int, *labels: Label) -> np.random.Generator:
    """
    Independent generator derived from (master seed, labels).

    The same seed and labels always give the same stream, no matter
    which thread or in which order it is requested.
    """
    sequence = np.random.SeedSequence(
        entropy=seed, spawn_key=tuple(_label_key(label) for label in labels)
    )
    return np.random.default_rng(sequence)


def default_threads() -> int:
    """Available parallelism"""
    return os.cpu_count() or 1


async def gather_in_threads(
    func: Callable[[T], R], items: Sequence[T], threads: int
) -> List[R]:
    """Run func over items on a thread pool; results keep input order"""
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        tasks = [loop.run_in_executor(pool, func, item) for item in items]
        return list(await asyncio.gather(*tasks))


def run_parallel(
    func: Callable[[T], R], items: Iterable[T], threads: int = 1
) -> List[R]:
    """Ordered map; serial when threads <= 1"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    return asyncio.run(gather_in_threads(func, items, threads))


def draw_categorical(
    probs: np.ndarray, rng: np.random.Generator, levels: Optional[Sequence[float]] = None
) -> np.ndarray:
    """One draw per row of probs; returns levels (default codes 1..m)"""
    probs = np.atleast_2d(probs)
    if levels is None:
        levels = np.arange(1, probs.shape[1] + 1)
    cumulative = np.cumsum(probs, axis=1)
    cumulative[:, -1] = 1.0
    uniforms = rng.random(len(probs))
    picks = (uniforms[:, None] >= cumulative).sum(axis=1)
    return np.asarray(levels, dtype=float)[np.minimum(picks, probs.shape[1] - 1)]


def indicator_columns(values: np.ndarray, levels: int) -> np.ndarray:
    """Dummies for codes 1..levels-1; the last level is the reference"""
    return np.column_stack([values == c for c in range(1, levels)]).astype(float)
