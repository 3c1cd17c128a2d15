"""Parameter containers for the model components."""
from typing import Dict, Iterator, List, Tuple

import numpy as np

from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tensor
from uqrank.globals.errors import ShapeError


def parameter(values: np.ndarray) -> Tensor:
    return Tensor(values, requires_grad=True)


def glorot(rng: RngStream, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
    """Uniform Glorot initialization."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return parameter((rng.uniform(shape) * 2.0 - 1.0) * bound)


def zeros(shape: Tuple[int, ...]) -> Tensor:
    return parameter(np.zeros(shape))


class Module:
    """
    Base class of everything that owns trainable tensors.

    Parameters are discovered from instance attributes in assignment order: tensors with
    ``requires_grad``, nested modules and lists of modules. The order is stable, so
    gradient reduction and weight files are deterministic.
    """

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        found: List[Tuple[str, Tensor]] = []
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                found.append((full, value))
            elif isinstance(value, Module):
                found.extend(value.named_parameters(f"{full}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.extend(item.named_parameters(f"{full}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        found.append((f"{full}.{i}", item))
        return found

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.parameters())

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Copies of all parameter values keyed by dotted name."""
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place.

        Raises:
            ShapeError: If a name is missing or a shape differs
        """
        for name, t in self.named_parameters():
            if name not in state:
                raise ShapeError(f"weights lack parameter {name}")
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != t.shape:
                raise ShapeError(f"parameter {name}: expected {t.shape}, got {values.shape}")
            t.data = values.copy()

    def zero_(self) -> None:
        """Set every parameter to zero."""
        for t in self.parameters():
            t.data = np.zeros_like(t.data)
