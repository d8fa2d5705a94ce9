"""Counter-based splittable random streams.

Every stochastic object in this package draws from a Philox4x64-10
counter-based generator.  A stream is addressed by four integers

    (seed, purpose, a, b)

mapped onto the Philox state as key = [seed, purpose] and initial
counter = [0, 0, a, b].  Distinct addresses give statistically
independent streams by construction, so ensembles keyed by trajectory
index (and branches keyed by (parent, branch)) are reproducible under
any processing order or thread count.

The numba kernels in ``_kernels`` consume the identical sequence of
doubles through their own Philox implementation (see ``_philox``), so a
stream yields the same values whether it is read from Python or from
inside a kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Stream purposes.  Keep in sync with the kernels, which receive these
# as plain integers.
PURPOSE_TRAJ = 0          # main per-trajectory stream
PURPOSE_VIRTUAL = 1       # auxiliary Born draws for the virtual s_tot trace
PURPOSE_BRANCH = 2        # branch continuations, addressed (parent, branch)
PURPOSE_BRANCH_VIRTUAL = 3
PURPOSE_BOOTSTRAP = 4     # resampling in the estimators
PURPOSE_TEST = 9          # scratch streams inside the test-suite

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class StreamKey:
    """Address of one random stream."""

    seed: int
    purpose: int = PURPOSE_TRAJ
    a: int = 0
    b: int = 0

    def __post_init__(self):
        for name in ("seed", "purpose", "a", "b"):
            v = getattr(self, name)
            if not 0 <= v <= _U64:
                raise ValueError(f"stream field {name}={v} outside [0, 2^64)")

    def generator(self) -> np.random.Generator:
        """numpy Generator positioned at the start of this stream."""
        bitgen = np.random.Philox(counter=[0, 0, self.a, self.b],
                                  key=[self.seed, self.purpose])
        return np.random.Generator(bitgen)

    def words(self) -> tuple[int, int, int, int]:
        return (self.seed, self.purpose, self.a, self.b)


def stream(seed: int, purpose: int = PURPOSE_TRAJ, a: int = 0, b: int = 0) -> np.random.Generator:
    """Shorthand for ``StreamKey(...).generator()``."""
    return StreamKey(seed, purpose, a, b).generator()
