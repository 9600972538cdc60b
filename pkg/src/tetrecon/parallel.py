"""Thread-count setting and deterministic chunked execution."""

import os
from concurrent.futures import ThreadPoolExecutor

_threads = None


def set_threads(n):
    global _threads
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = n


def get_threads(n=None):
    if n is not None:
        return max(1, int(n))
    if _threads is not None:
        return _threads
    return max(1, int(os.environ.get("TETRECON_THREADS", "1")))


def chunk_bounds(n, threads=None, min_chunk=256):
    """Contiguous [lo, hi) ranges covering range(n), one per worker at most."""
    t = get_threads(threads)
    k = max(1, min(t, -(-n // min_chunk))) if n else 1
    edges = [n * i // k for i in range(k + 1)]
    return list(zip(edges[:-1], edges[1:]))


def run_chunks(work, bounds, threads=None):
    """Run ``work(lo, hi)`` for every range and return results in range order."""
    t = get_threads(threads)
    if t == 1 or len(bounds) == 1:
        return [work(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=t) as ex:
        return list(ex.map(lambda b: work(*b), bounds))
