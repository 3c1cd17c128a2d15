"""Per-round and per-dialog outputs of one model forward pass."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from uqrank.autodiff.tensor import Tensor
from uqrank.modules.decoder import LatentGaussian
from uqrank.modules.uncertainty import LogitVariancePair, RuamState

COMPONENTS = ("CE", "GCE", "VE", "UDL", "KL", "DIV", "TOK")
# mean predicted aleatoric variance, logged next to the loss components
VARIANCE = "variance"


@dataclass
class RoundOutput:
    """
    Everything one round of the forward pass produced.

    Attributes:
        pair: Final candidate logits and variances (after the attention rewrite, if any)
        losses: Loss components by flag name; a missing key was not computed
        uncertainty_loss: Aleatoric loss ``L_u`` used for the rewrite (GCE + VE + UDL)
        attention: Attention map used for the final context (``u x v``)
        ruam: Rewrite intermediates, None when the rewrite is disabled
        latent: Latent Gaussian of the answer
        likelihoods: Candidate log-likelihoods under the decoder at ``z = mu``
    """

    pair: LogitVariancePair
    losses: Dict[str, Tensor]
    uncertainty_loss: Tensor
    attention: np.ndarray
    ruam: Optional[RuamState] = None
    latent: Optional[LatentGaussian] = None
    likelihoods: Optional[np.ndarray] = None

    def probabilities(self) -> np.ndarray:
        logits = self.pair.logits.data
        shifted = np.exp(logits - logits.max())
        return shifted / shifted.sum()

    def variances(self) -> np.ndarray:
        return self.pair.variance.numpy()


@dataclass
class DialogOutput:
    dialog_id: int
    rounds: List[RoundOutput] = field(default_factory=list)

    def component_values(self) -> Dict[str, float]:
        """
        Mean value of every computed loss component over the rounds.

        The mean predicted aleatoric variance of the rounds is included under
        :data:`VARIANCE`; it is not a cost term.
        """
        values: Dict[str, List[float]] = {}
        for rnd in self.rounds:
            for name, tensor in rnd.losses.items():
                values.setdefault(name, []).append(tensor.item())
            values.setdefault(VARIANCE, []).append(float(rnd.variances().mean()))
        return {name: float(np.mean(v)) for name, v in values.items()}
