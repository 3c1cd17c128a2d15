"""The combined training cost."""
import math
from typing import AbstractSet, Sequence

from uqrank.autodiff.tensor import Tensor
from uqrank.domain_model.outputs import RoundOutput
from uqrank.globals.errors import NonFiniteLossError, UsageError

# components entering the cost directly; GCE, VE and UDL enter through L_u
DIRECT_TERMS = ("CE", "TOK", "KL", "DIV")


def round_cost(output: RoundOutput, flags: AbstractSet[str], eta: float) -> Tensor:
    """``[CE] + [TOK] + [KL] + [DIV] + eta * L_u`` for one round; disabled terms are skipped."""
    cost = Tensor(0.0)
    for name in DIRECT_TERMS:
        if name in flags and name in output.losses:
            cost = cost + output.losses[name]
    if eta > 0 and flags & {"GCE", "VE", "UDL"}:
        cost = cost + output.uncertainty_loss * eta
    return cost


def total_cost(outputs: Sequence[RoundOutput], flags: AbstractSet[str], eta: float) -> Tensor:
    """
    Mean round cost over a group of rounds.

    Raises:
        UsageError: If ``outputs`` is empty
    """
    if not outputs:
        raise UsageError("total_cost needs at least one round output")
    cost = Tensor(0.0)
    for output in outputs:
        cost = cost + round_cost(output, flags, eta)
    return cost / float(len(outputs))


def check_finite(outputs: Sequence[RoundOutput], epoch: int) -> None:
    """
    Raises:
        NonFiniteLossError: Naming the first component that is NaN or infinite
    """
    for output in outputs:
        for name, value in output.losses.items():
            if not math.isfinite(value.item()):
                raise NonFiniteLossError(name, epoch)
