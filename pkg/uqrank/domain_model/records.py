"""Dialog data: records, vocabulary, generation spec and padded batches."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from uqrank.globals.errors import ConfigError

Tokens = Tuple[str, ...]

PAD, UNK, START, END = 0, 1, 2, 3
RESERVED: Tuple[str, ...] = ("<pad>", "<unk>", "<start>", "<end>")


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: str
    row: int
    col: int


@dataclass(frozen=True)
class DialogRound:
    """
    One question/answer round.

    Attributes:
        question: Question tokens
        answer: Ground-truth answer tokens
        candidates: Candidate answers; ``candidates[gt_index]`` is the human answer
        gt_index: Index of the ground-truth candidate
        relevance: Per-candidate relevance in [0, 1] (gt is 1)
    """

    question: Tokens
    answer: Tokens
    candidates: Tuple[Tokens, ...]
    gt_index: int
    relevance: Tuple[float, ...] = ()


@dataclass(frozen=True)
class DialogRecord:
    """
    A dialog about one image.

    Attributes:
        dialog_id: Identifier, also the image id in JSON files
        image: ``3 x 32 x 32`` pixels, or None when no image features were supplied
        caption: Caption tokens
        rounds: Question/answer rounds in order
        scene: Symbolic scene the image was rendered from (synthetic data only)
    """

    dialog_id: int
    image: Optional[np.ndarray]
    caption: Tokens
    rounds: Tuple[DialogRound, ...]
    scene: Tuple[SceneObject, ...] = ()


@dataclass
class Vocab:
    """
    Token to id map. Ids 0-3 are reserved for PAD, UNK, START and END; the remaining ids
    are dense and follow the sorted token order.
    """

    token_to_id: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.token_to_id:
            self.token_to_id = {tok: i for i, tok in enumerate(RESERVED)}
        self.id_to_token: List[str] = [""] * len(self.token_to_id)
        for tok, i in self.token_to_id.items():
            self.id_to_token[i] = tok

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocab":
        mapping = {tok: i for i, tok in enumerate(RESERVED)}
        for tok in tokens:
            if tok not in mapping:
                mapping[tok] = len(mapping)
        return cls(mapping)

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [
            self.id_to_token[i] if 0 <= i < len(self.id_to_token) else RESERVED[UNK]
            for i in ids
        ]

    def clamp(self, ids: Sequence[int]) -> List[int]:
        """Map ids outside the vocabulary to UNK."""
        return [i if 0 <= i < len(self) else UNK for i in ids]


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """
    Parameters of the synthetic shapes-dialog task.

    Attributes:
        seed: Root seed; the same spec always yields the same dataset
        num_dialogs: Number of dialogs
        rounds_per_dialog: Rounds per dialog (1-10)
        num_candidates: Candidate answers per round
        grid_size: Cells per image side
        cell_px: Pixels per cell side
        shapes: Shape inventory
        colors: Color inventory
        min_objects: Fewest objects in a scene
        max_objects: Most objects in a scene
        noise_gamma: Multiplicative image noise; also drives question-token noise
        paraphrase_relevance: Relevance of the paraphrased ground truth
        first_id: Id of the first dialog
    """

    seed: int = 0
    num_dialogs: int = 500
    rounds_per_dialog: int = 5
    num_candidates: int = 20
    grid_size: int = 4
    cell_px: int = 8
    shapes: Tuple[str, ...] = ("square", "circle", "triangle", "cross")
    colors: Tuple[str, ...] = ("red", "green", "blue", "yellow")
    min_objects: int = 2
    max_objects: int = 4
    noise_gamma: float = 1.0
    paraphrase_relevance: float = 0.5
    first_id: int = 0

    def validate(self) -> None:
        """Raises ConfigError when the task settings cannot produce a dataset."""
        if not self.shapes or not self.colors:
            raise ConfigError("shape and color inventories must be non-empty")
        if self.num_candidates < 2:
            raise ConfigError("num_candidates must be >= 2")
        if not 1 <= self.rounds_per_dialog <= 10:
            raise ConfigError("rounds_per_dialog must lie in [1, 10]")
        if self.min_objects < 1 or self.min_objects > self.max_objects:
            raise ConfigError("need 1 <= min_objects <= max_objects")
        if self.max_objects > self.grid_size * self.grid_size:
            raise ConfigError(
                f"{self.max_objects} objects do not fit a {self.grid_size}x{self.grid_size} grid"
            )
        if self.num_dialogs < 0 or self.noise_gamma < 0:
            raise ConfigError("num_dialogs and noise_gamma must be >= 0")

    @property
    def image_px(self) -> int:
        return self.grid_size * self.cell_px


@dataclass(frozen=True)
class Limits:
    caption: int = 24
    question: int = 16
    answer: int = 8

    def __post_init__(self) -> None:
        if min(self.caption, self.question, self.answer) < 1:
            raise ConfigError("token limits must be positive")


@dataclass
class Batch:
    """
    Padded id arrays for a group of dialogs (PAD = 0 on the right).

    Shapes use B dialogs, R rounds (batch max), K candidates and L token positions.
    """

    dialog_ids: List[int]
    images: Optional[np.ndarray]  # B x 3 x H x W
    captions: np.ndarray  # B x Lc
    caption_lengths: np.ndarray  # B
    questions: np.ndarray  # B x R x Lq
    question_lengths: np.ndarray  # B x R
    answers: np.ndarray  # B x R x La
    answer_lengths: np.ndarray  # B x R
    candidates: np.ndarray  # B x R x K x La
    candidate_lengths: np.ndarray  # B x R x K
    num_candidates: np.ndarray  # B x R
    gt_index: np.ndarray  # B x R
    relevance: np.ndarray  # B x R x K
    round_mask: np.ndarray  # B x R, 1 for real rounds

    def __len__(self) -> int:
        return len(self.dialog_ids)

    @property
    def num_rounds(self) -> int:
        return int(self.round_mask.sum())

    def dialogs(self) -> List["EncodedDialog"]:
        """Unpadded per-dialog view of the batch."""
        out = []
        for i, dialog_id in enumerate(self.dialog_ids):
            rounds = []
            for r in range(self.round_mask.shape[1]):
                if not self.round_mask[i, r]:
                    continue
                k = int(self.num_candidates[i, r])
                rounds.append(
                    EncodedRound(
                        question=self.questions[i, r, : self.question_lengths[i, r]].tolist(),
                        answer=self.answers[i, r, : self.answer_lengths[i, r]].tolist(),
                        candidates=[
                            self.candidates[i, r, c, : self.candidate_lengths[i, r, c]].tolist()
                            for c in range(k)
                        ],
                        gt_index=int(self.gt_index[i, r]),
                        relevance=self.relevance[i, r, :k].copy(),
                    )
                )
            out.append(
                EncodedDialog(
                    dialog_id=dialog_id,
                    image=None if self.images is None else self.images[i],
                    caption=self.captions[i, : self.caption_lengths[i]].tolist(),
                    rounds=rounds,
                )
            )
        return out


@dataclass
class EncodedRound:
    question: List[int]
    answer: List[int]
    candidates: List[List[int]]
    gt_index: int
    relevance: np.ndarray


@dataclass
class EncodedDialog:
    """Token ids of one dialog, ready for the model."""

    dialog_id: int
    image: Optional[np.ndarray]
    caption: List[int]
    rounds: List[EncodedRound]
