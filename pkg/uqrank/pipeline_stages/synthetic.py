"""Deterministic synthetic shapes-dialog generator."""
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from uqrank.autodiff.rng import RngStream
from uqrank.domain_model.records import (
    DialogRecord,
    DialogRound,
    SceneObject,
    SyntheticTaskSpec,
    Tokens,
)
from uqrank.globals.errors import ConfigError
from uqrank.globals.problems import Problem, ProblemLevel, Problems
from uqrank.globals.process_stage import ProcessStage

logger = logging.getLogger(__name__)

NUMBER_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine")
QUADRANTS = (("top", "left"), ("top", "right"), ("bottom", "left"), ("bottom", "right"))
QUESTION_KINDS = ("color", "shape", "count", "location", "yesno")
FILLERS: Tuple[Tokens, ...] = (
    ("i", "cannot", "tell"),
    ("not", "sure"),
    ("maybe",),
    ("hard", "to", "say"),
    ("no", "idea"),
    ("i", "think", "so"),
)
PALETTE: Dict[str, Tuple[float, float, float]] = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "purple": (0.6, 0.0, 0.8),
    "cyan": (0.0, 1.0, 1.0),
    "white": (1.0, 1.0, 1.0),
    "orange": (1.0, 0.5, 0.0),
}


def _shape_masks(cell: int) -> List[np.ndarray]:
    y, x = np.mgrid[0:cell, 0:cell].astype(float)
    c = (cell - 1) / 2.0
    inside = (y >= 1) & (y <= cell - 2) & (x >= 1) & (x <= cell - 2)
    square = inside
    circle = (y - c) ** 2 + (x - c) ** 2 <= (cell / 2.0 - 1) ** 2
    triangle = inside & (np.abs(x - c) <= (y - 1) / 2.0 + 0.5)
    cross = inside & ((np.abs(x - c) <= 0.75) | (np.abs(y - c) <= 0.75))
    diamond = np.abs(x - c) + np.abs(y - c) <= cell / 2.0 - 1
    return [m.astype(float) for m in (square, circle, triangle, cross, diamond)]


def _color(name: str, index: int) -> Tuple[float, float, float]:
    if name in PALETTE:
        return PALETTE[name]
    hue = (index * 0.37) % 1.0
    return (abs(np.cos(np.pi * hue)), abs(np.sin(np.pi * hue)), hue)


def render_scene(scene: Sequence[SceneObject], spec: SyntheticTaskSpec) -> np.ndarray:
    """Noiseless ``3 x H x W`` rendering of a scene, pixel values in [0, 1]."""
    px = spec.image_px
    image = np.zeros((3, px, px))
    masks = _shape_masks(spec.cell_px)
    for obj in scene:
        mask = masks[spec.shapes.index(obj.shape) % len(masks)]
        rgb = _color(obj.color, spec.colors.index(obj.color))
        top, left = obj.row * spec.cell_px, obj.col * spec.cell_px
        for channel in range(3):
            image[channel, top : top + spec.cell_px, left : left + spec.cell_px] = (
                mask * rgb[channel]
            )
    return image


def quadrant(obj: SceneObject, grid_size: int) -> Tokens:
    half = grid_size / 2.0
    return QUADRANTS[(2 if obj.row >= half else 0) + (1 if obj.col >= half else 0)]


def answer_question(scene: Sequence[SceneObject], question: Tokens, grid_size: int) -> Tokens:
    """
    Answer a templated question directly from the symbolic scene.

    Returns the canonical answer form, or an empty tuple for an unrecognized question.
    """
    q = tuple(question)
    if q[:4] == ("what", "color", "is", "the"):
        matches = [o for o in scene if o.shape == q[4]]
        return (matches[0].color,) if len(matches) == 1 else ()
    if q[:4] == ("what", "shape", "is", "the"):
        matches = [o for o in scene if o.color == q[4]]
        return (matches[0].shape,) if len(matches) == 1 else ()
    if q == ("how", "many", "objects", "are", "there", "?"):
        return (NUMBER_WORDS[len(scene)],)
    if q[:2] == ("how", "many") and len(q) == 7:
        return (NUMBER_WORDS[sum(1 for o in scene if o.color == q[2])],)
    if q[:3] == ("where", "is", "the"):
        matches = [o for o in scene if o.shape == q[3]]
        return quadrant(matches[0], grid_size) if len(matches) == 1 else ()
    if q[:3] == ("is", "there", "a"):
        found = any(o.color == q[3] and o.shape == q[4] for o in scene)
        return ("yes",) if found else ("no",)
    return ()


def paraphrase(kind: str, answer: Tokens) -> Tokens:
    if kind == "color":
        return ("it", "is") + answer
    if kind == "shape":
        return ("a",) + answer
    if kind == "count":
        return ("there", "are") + answer
    if kind == "location":
        return ("in", "the") + answer
    return ("yes", "it", "is") if answer == ("yes",) else ("no", "there", "is", "not")


class SyntheticGenerator(ProcessStage[SyntheticTaskSpec, List[DialogRecord]]):
    """
    Renders shape scenes on a cell grid and asks templated questions about them.

    Each dialog uses its own substreams (scene, questions, noise), so changing the noise
    level never changes the scenes or the questions asked.
    """

    def __init__(self, problems: Problems) -> None:
        super().__init__(problems)

    def process(self, spec: SyntheticTaskSpec) -> List[DialogRecord]:
        spec.validate()
        self._check_candidate_pool(spec)
        root = RngStream(spec.seed)
        records = [
            self._dialog(spec, root.split(i), spec.first_id + i) for i in range(spec.num_dialogs)
        ]
        logger.debug("generated %d synthetic dialogs (seed %d)", len(records), spec.seed)
        return records

    def _check_candidate_pool(self, spec: SyntheticTaskSpec) -> None:
        if spec.max_objects >= len(NUMBER_WORDS):
            raise ConfigError(f"at most {len(NUMBER_WORDS) - 1} objects per scene are supported")
        smallest = min(len(self._forms(k, spec)) for k in QUESTION_KINDS)
        available = sum(len(self._forms(k, spec)) for k in QUESTION_KINDS) + len(FILLERS)
        if available < spec.num_candidates:
            raise ConfigError(
                f"inventories give only {available} distinct answers, "
                f"{spec.num_candidates} candidates requested"
            )
        if smallest < 2:
            raise ConfigError("every answer type needs at least two values")

    def _dialog(self, spec: SyntheticTaskSpec, rng: RngStream, dialog_id: int) -> DialogRecord:
        scene = self._scene(spec, rng.split(0))
        image = render_scene(scene, spec) * spec.noise_gamma
        words = self._word_pool(spec)
        question_rng, noise_rng = rng.split(1), rng.split(2)
        noise_p = float(np.clip(1.0 - spec.noise_gamma, 0.0, 0.3))
        rounds = []
        for r in range(spec.rounds_per_dialog):
            kind, question, answer = self._question(scene, spec, question_rng)
            candidates, gt_index, relevance = self._candidates(kind, answer, spec, question_rng)
            if noise_p > 0:
                question = self._noisy(question, words, noise_p, noise_rng)
            rounds.append(DialogRound(question, answer, candidates, gt_index, relevance))
        caption = ("an", "image", "with", NUMBER_WORDS[len(scene)], "shapes")
        return DialogRecord(dialog_id, image, caption, tuple(rounds), tuple(scene))

    def _scene(self, spec: SyntheticTaskSpec, rng: RngStream) -> List[SceneObject]:
        count = int(rng.integers(spec.min_objects, spec.max_objects + 1))
        cells = rng.choice(spec.grid_size * spec.grid_size, count, replace=False)
        shapes = rng.integers(0, len(spec.shapes), count)
        colors = rng.integers(0, len(spec.colors), count)
        return [
            SceneObject(
                spec.shapes[int(s)],
                spec.colors[int(c)],
                int(cell) // spec.grid_size,
                int(cell) % spec.grid_size,
            )
            for cell, s, c in zip(cells, shapes, colors)
        ]

    def _question(
        self, scene: List[SceneObject], spec: SyntheticTaskSpec, rng: RngStream
    ) -> Tuple[str, Tokens, Tokens]:
        unique_shapes = [o for o in scene if sum(p.shape == o.shape for p in scene) == 1]
        unique_colors = [o for o in scene if sum(p.color == o.color for p in scene) == 1]
        kinds = ["count", "yesno"]
        if unique_shapes:
            kinds += ["color", "location"]
        if unique_colors:
            kinds.append("shape")
        kinds.sort(key=QUESTION_KINDS.index)
        kind = kinds[int(rng.integers(0, len(kinds)))]
        if kind == "color":
            obj = unique_shapes[int(rng.integers(0, len(unique_shapes)))]
            question: Tokens = ("what", "color", "is", "the", obj.shape, "?")
        elif kind == "shape":
            obj = unique_colors[int(rng.integers(0, len(unique_colors)))]
            question = ("what", "shape", "is", "the", obj.color, "object", "?")
        elif kind == "location":
            obj = unique_shapes[int(rng.integers(0, len(unique_shapes)))]
            question = ("where", "is", "the", obj.shape, "?")
        elif kind == "count":
            if rng.uniform() < 0.5:
                question = ("how", "many", "objects", "are", "there", "?")
            else:
                color = spec.colors[int(rng.integers(0, len(spec.colors)))]
                question = ("how", "many", color, "objects", "are", "there", "?")
        else:
            if rng.uniform() < 0.5:
                obj = scene[int(rng.integers(0, len(scene)))]
                color, shape = obj.color, obj.shape
            else:
                color = spec.colors[int(rng.integers(0, len(spec.colors)))]
                shape = spec.shapes[int(rng.integers(0, len(spec.shapes)))]
            question = ("is", "there", "a", color, shape, "?")
        return kind, question, answer_question(scene, question, spec.grid_size)

    def _forms(self, kind: str, spec: SyntheticTaskSpec) -> List[Tokens]:
        if kind == "color":
            values: List[Tokens] = [(c,) for c in spec.colors]
        elif kind == "shape":
            values = [(s,) for s in spec.shapes]
        elif kind == "count":
            values = [(w,) for w in NUMBER_WORDS[: spec.max_objects + 1]]
        elif kind == "location":
            values = list(QUADRANTS)
        else:
            values = [("yes",), ("no",)]
        return values

    def _candidates(
        self, kind: str, answer: Tokens, spec: SyntheticTaskSpec, rng: RngStream
    ) -> Tuple[Tuple[Tokens, ...], int, Tuple[float, ...]]:
        same = [v for v in self._forms(kind, spec) if v != answer]
        same_forms = [f for v in same for f in (v, paraphrase(kind, v))]
        other_forms = [
            f
            for k in QUESTION_KINDS
            if k != kind
            for v in self._forms(k, spec)
            for f in (v, paraphrase(k, v))
        ]
        other_forms += list(FILLERS)
        pool: List[Tokens] = [answer, paraphrase(kind, answer)]
        for group in (same_forms, other_forms):
            order = rng.permutation(len(group))
            for i in order:
                if len(pool) == spec.num_candidates:
                    break
                if group[int(i)] not in pool:
                    pool.append(group[int(i)])
        pool = pool[: spec.num_candidates]
        relevance_of = {answer: 1.0, paraphrase(kind, answer): spec.paraphrase_relevance}
        order = rng.permutation(len(pool))
        candidates = tuple(pool[int(i)] for i in order)
        relevance = tuple(relevance_of.get(c, 0.0) for c in candidates)
        return candidates, candidates.index(answer), relevance

    def _word_pool(self, spec: SyntheticTaskSpec) -> List[str]:
        words = {
            "what", "color", "is", "the", "shape", "object", "how", "many", "objects",
            "are", "there", "where", "a",
        }
        words.update(spec.shapes)
        words.update(spec.colors)
        return sorted(words)

    def _noisy(self, question: Tokens, words: List[str], p: float, rng: RngStream) -> Tokens:
        flips = rng.uniform(len(question)) < p
        picks = rng.integers(0, len(words), len(question))
        return tuple(
            words[int(picks[i])] if flips[i] and tok != "?" else tok
            for i, tok in enumerate(question)
        )


def gen_synthetic(spec: SyntheticTaskSpec, problems: Problems | None = None) -> List[DialogRecord]:
    """Generate the synthetic dataset described by ``spec``.

    Raises:
        ConfigError: If the task settings are inconsistent (e.g. more objects than cells)
    """
    collected = problems if problems is not None else Problems()
    records = SyntheticGenerator(collected).process(spec)
    if spec.noise_gamma != 1.0:
        collected.append(
            Problem(
                "synthetic",
                ProblemLevel.NON,
                f"images scaled by noise_gamma={spec.noise_gamma}",
                "noise",
            )
        )
    return records
