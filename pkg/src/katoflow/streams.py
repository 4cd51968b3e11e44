"""Deterministic RNG substreams and chunked accumulation.

Monte Carlo work is split into fixed-size chunks; chunk ``k`` of an operation
tagged ``tag`` always draws from ``default_rng((seed, tag, k))``, so results
are bit-identical regardless of how many workers process the chunks.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_CHUNK = 4096

# fixed per-operation stream tags; never reuse a value
TAG_TRANSITION = 1
TAG_PATH = 2
TAG_COUPLING = 3
TAG_FK = 4
TAG_KATO_MC = 5
TAG_MOMENT = 6
TAG_EXPMOMENT = 7


def combine_seed(seed, *ids):
    """Flat integer tuple addressing a derived stream family."""
    if isinstance(seed, (tuple, list)):
        base = tuple(int(s) for s in seed)
    else:
        base = (int(seed),)
    return base + tuple(int(i) for i in ids)


def substream(seed, *ids):
    """Generator for the substream addressed by (seed, *ids)."""
    return np.random.default_rng(combine_seed(seed, *ids))


def chunk_sizes(n_total, chunk=DEFAULT_CHUNK):
    """Sizes of the fixed chunk decomposition of ``n_total`` items."""
    n_total = int(n_total)
    out = []
    done = 0
    while done < n_total:
        size = min(chunk, n_total - done)
        out.append(size)
        done += size
    return out


def map_chunks(fn, n_total, seed, tag, chunk=DEFAULT_CHUNK, workers=1):
    """Run ``fn(rng, size, chunk_index)`` over every chunk, in chunk order.

    Returns the list of per-chunk results ordered by chunk index, so any
    associative merge over the list is worker-count independent.
    """
    sizes = chunk_sizes(n_total, chunk)
    jobs = [(k, size) for k, size in enumerate(sizes)]

    def run(job):
        k, size = job
        return fn(substream(seed, tag, k), size, k)

    if workers <= 1 or len(jobs) <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))
