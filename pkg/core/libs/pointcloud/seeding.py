"""Seed derivation for reproducible Monte Carlo.

Replicate r of an experiment with seed s draws from a Philox counter-based
generator keyed by the two 64-bit words (s, substream), counter starting at
zero. The substream word packs an optional stage index into its high 32 bits
and the replicate index into the low 32 bits, so the stream a replicate sees
never depends on which worker runs it or in what order.
"""
import numpy as np

from core.libs.errors import InvalidArgumentError

SEED_LIMIT = 1 << 64
REPLICATE_LIMIT = 1 << 32


def substream_key(replicate=0, stage=0):
    if not 0 <= replicate < REPLICATE_LIMIT or not 0 <= stage < REPLICATE_LIMIT:
        raise InvalidArgumentError(f"substream indices out of range: replicate={replicate}, stage={stage}")
    return (int(stage) << 32) | int(replicate)


def substream_rng(seed, replicate=0, stage=0):
    if not 0 <= int(seed) < SEED_LIMIT:
        raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {seed}")
    key = np.array([int(seed), substream_key(replicate, stage)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
