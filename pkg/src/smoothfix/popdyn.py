"""Population-dynamics sampling of the fixed-point law.

A pool of n samples approximates the law of the fixed point X.  One
iteration replaces every sample with sum_j T_j X_{I_j}: a fresh weight
draw per output and ancestor indices I_j drawn uniformly with replacement
from the previous pool.

Every output index owns a fixed block of uniforms in a counter-based
stream keyed by (seed, generation): columns [0, budget) drive the weight
draw, the next max_children columns the ancestor indices, the rest pad
the row to a counter block.  Results are therefore independent of chunk
sizes or thread counts, and any single output can be recomputed in
isolation.

The pool mean is a martingale across generations, but resampling makes
samples within a generation dependent: the variance of the pool mean
accumulates as sum_k var_k / n over generations rather than staying at
var/n.  Summaries report that accumulated standard error as mean_se; it
is the right scale for "mean preserved within a few SE" checks, while the
naive single-generation formula understates the spread several-fold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import fingerprint
from .rng import DOMAIN_POPDYN, padded_width, philox


class PoolOverflowError(ArithmeticError):
    """A pool update produced a non-finite sample."""

    def __init__(self, generation: int, index: int, weights: tuple):
        self.generation = generation
        self.index = index
        self.weights = weights
        super().__init__(
            f"non-finite sample at pool index {index} in generation {generation}; "
            f"offending weight draw: {weights!r}"
        )


@dataclass(frozen=True)
class SamplePool:
    """Pool of fixed-point samples after some number of generations."""

    generation: int
    samples: np.ndarray  # complex128, shape (n,)
    seed: int | None
    model_fingerprint: str

    @property
    def n(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class GenerationSummary:
    generation: int
    mean: complex
    spread: float  # pool standard deviation, sqrt(var_re + var_im)
    mean_se: float  # accumulated SE of the pool mean across generations
    p_moment: float  # mean |X|^p
    im_dispersion: float


@dataclass(frozen=True)
class RunResult:
    pool: SamplePool
    summaries: tuple[GenerationSummary, ...]
    snapshots: dict
    p: float


def init_pool(n: int, value: complex = 1.0, seed: int | None = None,
              model_fingerprint: str = "") -> SamplePool:
    if n < 2:
        raise ValueError(f"pool size must be at least 2, got {n}")
    samples = np.full(int(n), complex(value), dtype=np.complex128)
    return SamplePool(0, samples, seed, model_fingerprint)


def _gather_used(block: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Flatten the first counts[i] entries of row i of block."""
    rows, width = block.shape
    c0 = int(counts[0])
    if (counts == c0).all():
        return block[:, :c0].reshape(-1)
    total = int(counts.sum())
    ends = np.cumsum(counts)
    within = np.arange(total) - np.repeat(ends - counts, counts)
    rows_flat = np.repeat(np.arange(rows), counts)
    return block[rows_flat, within]


def iterate(pool: SamplePool, model, rng: np.random.Generator,
            chunk_rows: int = 1 << 16) -> SamplePool:
    """Advance the pool one generation.

    Consumes rng row-major, padded_width(budget + max_children) uniforms
    per output index; chunk_rows only controls memory, not results.
    """
    n = pool.n
    budget = model.uniform_budget
    max_c = model.max_children
    width = padded_width(budget + max_c)
    out = np.empty(n, dtype=np.complex128)
    for start in range(0, n, chunk_rows):
        stop = min(start + chunk_rows, n)
        u = rng.random((stop - start, width))
        values, counts = model.weights_from_uniforms(u[:, :budget])
        iu = _gather_used(u[:, budget : budget + max_c], counts)
        idx = np.minimum((iu * n).astype(np.int64), n - 1)
        offsets = np.concatenate(([0], np.cumsum(counts[:-1])))
        with np.errstate(over="ignore", invalid="ignore"):
            new = np.add.reduceat(values * pool.samples[idx], offsets)
        if not np.isfinite(new).all():
            row = int(np.flatnonzero(~np.isfinite(new))[0])
            lo = int(offsets[row])
            hi = lo + int(counts[row])
            raise PoolOverflowError(
                pool.generation + 1,
                start + row,
                tuple(complex(v) for v in values[lo:hi]),
            )
        out[start:stop] = new
    return SamplePool(pool.generation + 1, out, pool.seed, pool.model_fingerprint)


def _default_p(model) -> float:
    from .analysis import SubcriticalMeanError, find_alpha

    try:
        res = find_alpha(model)
        if res.method == "closed_form" and res.alpha is not None:
            return max(res.alpha - 0.1, 0.5 * res.alpha)
    except (SubcriticalMeanError, ValueError):
        pass
    return 1.0


def _summarize(pool: SamplePool, p: float, cum_var: float) -> GenerationSummary:
    z = pool.samples
    n = z.shape[0]
    mean = complex(z.mean())
    var = float(z.real.var(ddof=1) + z.imag.var(ddof=1))
    return GenerationSummary(
        generation=pool.generation,
        mean=mean,
        spread=math.sqrt(var),
        mean_se=math.sqrt(cum_var / n),
        p_moment=float(np.mean(np.abs(z) ** p)),
        im_dispersion=float(z.imag.std(ddof=1)),
    )


def run(model, n: int, K: int, seed: int, p: float | None = None,
        keep_generations: tuple = (), init_value: complex = 1.0) -> RunResult:
    """Run K generations from a constant pool and summarize each one.

    Generation k consumes the stream keyed by (seed, DOMAIN_POPDYN, k), so
    runs extend reproducibly: the first K' < K generations of a longer run
    match the shorter run exactly.
    """
    if K < 1:
        raise ValueError(f"K >= 1 generations required, got {K}")
    if p is None:
        p = _default_p(model)
    fp = fingerprint(model)
    pool = init_pool(n, init_value, seed, fp)
    keep = set(int(g) for g in keep_generations)
    snapshots: dict[int, SamplePool] = {}
    if 0 in keep:
        snapshots[0] = pool
    cum_var = 0.0
    summaries = [_summarize(pool, p, cum_var)]
    for k in range(1, K + 1):
        pool = iterate(pool, model, philox(seed, DOMAIN_POPDYN, k))
        z = pool.samples
        cum_var += float(z.real.var(ddof=1) + z.imag.var(ddof=1))
        summaries.append(_summarize(pool, p, cum_var))
        if k in keep:
            snapshots[k] = pool
    return RunResult(pool=pool, summaries=tuple(summaries), snapshots=snapshots, p=p)
