"""Worker-count-independent parallel execution of Monte Carlo chunks.

Chunks are fixed-size replicate ranges (see :func:`torusperc.rng.chunk_ranges`)
and results are merged in chunk order, so the statistics of a run depend only
on the seed and the trial count, never on how many workers processed them.
Kernels release the GIL under numba, so a thread pool gives real parallelism.
"""

from concurrent.futures import ThreadPoolExecutor


def map_chunks(fn, chunks, workers=1):
    """Apply ``fn(lo, hi)`` to every chunk; return results in chunk order."""
    if workers is None or workers <= 1 or len(chunks) <= 1:
        return [fn(lo, hi) for lo, hi in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in chunks]
        return [f.result() for f in futures]
