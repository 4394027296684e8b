"""Counter-based Gaussian draws addressed by (seed, path, step).

Every Brownian increment used by the simulation engine is a deterministic
function of (seed, path index, step index): word number
``path * n_steps + step`` of the Philox-4x64 stream keyed by ``seed`` is
mapped to a uniform in (0, 1) and then through the normal quantile.  That
makes results independent of path batching and of how many worker threads
happen to consume the blocks, and lets common-random-number estimators
re-draw the exact same increments for a bumped re-simulation.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

# paths per generation block used by the simulation drivers; block
# boundaries are part of no contract (any partition gives the same draws)
BLOCK = 8192


def normal_block(seed: int, n_steps: int, lo: int, hi: int) -> np.ndarray:
    """Standard normals for paths [lo, hi), shape (hi - lo, n_steps)."""
    if hi <= lo or lo < 0:
        raise ValueError(f"bad path range [{lo}, {hi})")
    w0 = lo * n_steps
    nwords = (hi - lo) * n_steps
    bg = Philox(key=seed)
    # advance() skips whole 4-word counter blocks; generate and drop the
    # remainder when the first word is not block-aligned
    q, r = divmod(w0, 4)
    bg.advance(q)
    raw = Generator(bg).integers(
        0, 2**64, size=r + nwords, dtype=np.uint64, endpoint=False
    )[r:]
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
    return ndtri(u).reshape(hi - lo, n_steps)
