"""Plain-text tensor files.

Format: a header line ``shape: d1 d2 ...`` (empty after the colon for a scalar), then
one value per line in row-major order, written with 17 significant digits so the file
reloads bit-exactly.
"""
from pathlib import Path

import numpy as np

from uqrank.autodiff.tensor import Tensor
from uqrank.globals.errors import ParseError

HEADER = "shape:"


def dumps_tensor(tensor: Tensor) -> str:
    dims = " ".join(str(d) for d in tensor.shape)
    lines = [f"{HEADER} {dims}".rstrip()]
    lines.extend(f"{v:.17g}" for v in tensor.data.reshape(-1))
    return "\n".join(lines) + "\n"


def loads_tensor(text: str, path: str = "<string>") -> Tensor:
    """Parse the text format.

    Raises:
        ParseError: On a bad header, a non-numeric value or a value count that does not
            match the header
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith(HEADER):
        raise ParseError(path, 1, 1, f'expected header "{HEADER} d1 d2 ..."')
    try:
        shape = tuple(int(d) for d in lines[0][len(HEADER) :].split())
    except ValueError as e:
        raise ParseError(path, 1, len(HEADER) + 1, f"bad dimension: {e}") from e
    values = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError as e:
            raise ParseError(path, n, 1, f"not a number: {line!r}") from e
    expected = int(np.prod(shape)) if shape else 1
    if len(values) != expected:
        raise ParseError(path, len(lines), 1, f"expected {expected} values, found {len(values)}")
    return Tensor(np.array(values).reshape(shape))


def save_tensor(tensor: Tensor, path: Path) -> None:
    Path(path).write_text(dumps_tensor(tensor), encoding="utf-8")


def load_tensor(path: Path) -> Tensor:
    return loads_tensor(Path(path).read_text(encoding="utf-8"), str(path))
