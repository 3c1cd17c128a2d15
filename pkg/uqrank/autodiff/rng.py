"""Counter-based deterministic random streams."""
from typing import Sequence, Tuple

import numpy as np

_MASK64 = (1 << 64) - 1


class RngStream:
    """
    Reproducible random stream keyed by ``(seed, path, counter)``.

    Every draw builds a fresh Philox generator from a key derived from the seed, the
    stream's split path and the draw counter, then advances the counter. Identical
    ``(seed, path, counter)`` therefore yield identical values on every platform, and
    substreams created with :meth:`split` never share state with their parent.

    Attributes:
        seed: 64-bit root seed
        path: Split path identifying this substream
        counter: Index of the next draw
    """

    def __init__(self, seed: int, path: Sequence[int] = (), counter: int = 0) -> None:
        self.seed = int(seed) & _MASK64
        self.path: Tuple[int, ...] = tuple(int(p) & _MASK64 for p in path)
        self.counter = counter

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path}, counter={self.counter})"

    def split(self, *path: int) -> "RngStream":
        """Independent child stream; the parent counter is not advanced."""
        return RngStream(self.seed, self.path + tuple(path))

    def _generator(self) -> np.random.Generator:
        entropy = [self.seed, len(self.path), *self.path, self.counter]
        key = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)
        self.counter += 1
        return np.random.Generator(np.random.Philox(key=key))

    def uniform(self, shape: Sequence[int] | int = ()) -> np.ndarray:
        return self._generator().random(shape)

    def normal(self, shape: Sequence[int] | int = ()) -> np.ndarray:
        return self._generator().standard_normal(shape)

    def bernoulli(self, shape: Sequence[int] | int, p_one: float) -> np.ndarray:
        """0/1 float array with ``P(1) = p_one``."""
        return (self._generator().random(shape) < p_one).astype(np.float64)

    def integers(self, low: int, high: int, size: Sequence[int] | int | None = None):
        """Integers in ``[low, high)``."""
        return self._generator().integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator().permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._generator().choice(n, size=size, replace=replace)
