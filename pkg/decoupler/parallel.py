"""Deterministic seeded sampling over a bounded thread pool.

Sample ``i`` of a run seeded with ``seed`` always draws from
``default_rng(SeedSequence(seed, spawn_key=(i,)))``. Samples are grouped in
chunks of fixed size and chunk results are combined in chunk order, so the
outcome does not depend on how many workers ran them.
"""

from __future__ import annotations

import os
from collections import Counter
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

SeedLike = int | np.random.Generator | np.random.SeedSequence | None
T = TypeVar("T")

CHUNK_SIZE = 64
MAX_WORKERS = 32
THREADS_ENV = "DECOUPLER_THREADS"


def as_generator(seed: SeedLike = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def resolve_workers(environ: Mapping[str, str] | None = None) -> int:
    """Worker cap from ``DECOUPLER_THREADS`` (1..32, default 1)."""
    raw = (os.environ if environ is None else environ).get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if not 1 <= workers <= MAX_WORKERS:
        raise ValueError(f"{THREADS_ENV} must lie in 1..{MAX_WORKERS}, got {workers}")
    return workers


def _chunks(samples: int) -> list[range]:
    return [
        range(offset, min(offset + CHUNK_SIZE, samples))
        for offset in range(0, samples, CHUNK_SIZE)
    ]


def _run_chunks(
    work: Callable[[range], T],
    samples: int,
    max_workers: int | None,
) -> tuple[list[T], Counter[str]]:
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    chunks = _chunks(samples)
    cap = resolve_workers() if max_workers is None else max_workers
    workers = max(1, min(cap, MAX_WORKERS, len(chunks)))
    diagnostics: Counter[str] = Counter(
        samples=samples, chunks=len(chunks), workers=workers
    )
    if workers == 1:
        return [work(chunk) for chunk in chunks], diagnostics
    with ThreadPoolExecutor(max_workers=workers) as executor:
        # map() yields in submission order, which keeps the combination order fixed.
        return list(executor.map(work, chunks)), diagnostics


def map_samples(
    draw: Callable[[np.random.Generator], T],
    samples: int,
    seed: int,
    *,
    max_workers: int | None = None,
) -> tuple[list[T], Counter[str]]:
    """Evaluate ``draw`` once per sample and return the results in index order."""

    def work(chunk: range) -> list[T]:
        return [draw(sample_rng(seed, index)) for index in chunk]

    results, diagnostics = _run_chunks(work, samples, max_workers)
    return [value for chunk in results for value in chunk], diagnostics


def sum_samples(
    draw: Callable[[np.random.Generator], np.ndarray],
    samples: int,
    seed: int,
    *,
    max_workers: int | None = None,
) -> tuple[np.ndarray, Counter[str]]:
    """Sum ``draw`` over all samples, chunk by chunk in a fixed order."""

    def work(chunk: range) -> np.ndarray:
        total = None
        for index in chunk:
            value = np.asarray(draw(sample_rng(seed, index)))
            total = value.copy() if total is None else total + value
        return total

    partials, diagnostics = _run_chunks(work, samples, max_workers)
    total = partials[0].copy()
    for partial in partials[1:]:
        total = total + partial
    return total, diagnostics
