"""Reading and writing dialogs in the VisDial JSON layout.

Only the subset of the schema the experiments need is handled::

    {"data": {"questions": [...], "answers": [...],
              "dialogs": [{"image_id": 1, "caption": "...",
                           "dialog": [{"question": 0, "answer": 3,
                                       "answer_options": [...], "gt_index": 5,
                                       "gt_relevance": [...]}]}]}}

``gt_relevance`` is optional. Image pixels live in a ``.npz`` sidecar keyed by image id.
"""
import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from uqrank.domain_model.records import DialogRecord, DialogRound, Limits, Tokens
from uqrank.globals.errors import ParseError, SchemaError
from uqrank.globals.problems import Problems
from uqrank.globals.process_stage import ProcessStage

logger = logging.getLogger(__name__)

TOKEN_PATTERN = re.compile(r"[a-z0-9']+|[?.,!]")


def tokenize(text: str) -> Tokens:
    """Lowercase word and punctuation tokens."""
    return tuple(TOKEN_PATTERN.findall(text.lower()))


def sidecar_path(path: Path) -> Path:
    """Image sidecar that accompanies a dialog JSON file."""
    path = Path(path)
    return path.with_name(f"{path.stem}.images.npz")


def _require(obj: Dict[str, Any], key: str, where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(key, where)
    return obj[key]


def _index(pool: List[str], value: Any, field: str, where: str) -> str:
    if not isinstance(value, int) or not 0 <= value < len(pool):
        raise SchemaError(field, f"{where} (index {value!r} not in pool)")
    return pool[value]


class VisDialLoader(ProcessStage[Path, List[DialogRecord]]):
    """
    Parses a VisDial-schema JSON file into dialog records.

    Sequences longer than the limits are truncated; each truncation is reported as a
    warning in the problems collection.
    """

    def __init__(
        self,
        problems: Problems,
        limits: Limits = Limits(),
        images: Optional[Dict[str, np.ndarray]] = None,
    ) -> None:
        super().__init__(problems)
        self.limits = limits
        self.images = images

    def process(self, path: Path) -> List[DialogRecord]:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ParseError(str(path), 0, 0, f"cannot read file: {e}") from e
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(str(path), e.lineno, e.colno, e.msg) from e

        data = _require(document, "data", str(path))
        questions = _require(data, "questions", "data")
        answers = _require(data, "answers", "data")
        dialogs = _require(data, "dialogs", "data")
        images = self.images
        if images is None and sidecar_path(path).is_file():
            images = load_images(sidecar_path(path))
        records = [
            self._dialog(d, questions, answers, images, f"data.dialogs[{i}]")
            for i, d in enumerate(dialogs)
        ]
        logger.debug("loaded %d dialogs from %s", len(records), path)
        return records

    def _clip(self, tokens: Tokens, limit: int, where: str, what: str) -> Tokens:
        if len(tokens) <= limit:
            return tokens
        self.report(where, f"{what} of {len(tokens)} tokens truncated to {limit}", "truncate")
        return tokens[:limit]

    def _dialog(
        self,
        dialog: Dict[str, Any],
        questions: List[str],
        answers: List[str],
        images: Optional[Dict[str, np.ndarray]],
        where: str,
    ) -> DialogRecord:
        image_id = _require(dialog, "image_id", where)
        raw_caption = tokenize(str(_require(dialog, "caption", where)))
        caption = self._clip(raw_caption, self.limits.caption, where, "caption")
        rounds = []
        for r, item in enumerate(_require(dialog, "dialog", where)):
            at = f"{where}.dialog[{r}]"
            question = self._clip(
                tokenize(_index(questions, _require(item, "question", at), "question", at)),
                self.limits.question,
                at,
                "question",
            )
            answer = self._clip(
                tokenize(_index(answers, _require(item, "answer", at), "answer", at)),
                self.limits.answer,
                at,
                "answer",
            )
            options = _require(item, "answer_options", at)
            candidates = tuple(
                tokenize(_index(answers, o, "answer_options", at))[: self.limits.answer]
                for o in options
            )
            gt_index = _require(item, "gt_index", at)
            if not isinstance(gt_index, int) or not 0 <= gt_index < len(candidates):
                raise SchemaError("gt_index", f"{at} (out of range)")
            relevance = self._relevance(item, len(candidates), gt_index, at)
            rounds.append(DialogRound(question, answer, candidates, gt_index, relevance))
        image = None
        if images is not None:
            image = images.get(str(image_id))
            if image is None:
                self.report(where, f"no image for id {image_id}", "image")
        return DialogRecord(int(image_id), image, caption, tuple(rounds))

    def _relevance(
        self, item: Dict[str, Any], n: int, gt_index: int, at: str
    ) -> Tuple[float, ...]:
        if "gt_relevance" not in item:
            return tuple(1.0 if i == gt_index else 0.0 for i in range(n))
        values = item["gt_relevance"]
        if not isinstance(values, list) or len(values) != n:
            raise SchemaError("gt_relevance", f"{at} (needs one value per answer option)")
        return tuple(float(v) for v in values)


def load_images(path: Path) -> Dict[str, np.ndarray]:
    with np.load(path) as archive:
        return {key: archive[key].astype(np.float64) for key in archive.files}


def load_visdial_json(
    path: Path,
    images: Optional[Dict[str, np.ndarray]] = None,
    limits: Limits = Limits(),
    problems: Optional[Problems] = None,
) -> List[DialogRecord]:
    """
    Load dialogs from a VisDial-schema JSON file.

    Args:
        path: JSON file
        images: Image arrays keyed by image id; defaults to the ``.images.npz`` sidecar
            if one exists, otherwise records carry no image
        limits: Caption, question and answer token limits
        problems: Collection receiving truncation warnings

    Raises:
        ParseError: Malformed JSON (with path, line and column)
        SchemaError: A required field is missing (the error names it)
    """
    return VisDialLoader(problems if problems is not None else Problems(), limits, images).process(
        path
    )


def write_visdial_json(records: Sequence[DialogRecord], path: Path) -> None:
    """Write records in the VisDial layout plus the image sidecar (if any record has one)."""
    path = Path(path)
    question_ids: Dict[str, int] = {}
    answer_ids: Dict[str, int] = {}

    def intern(pool: Dict[str, int], tokens: Tokens) -> int:
        text = " ".join(tokens)
        if text not in pool:
            pool[text] = len(pool)
        return pool[text]

    dialogs = []
    for record in records:
        rounds = []
        for rnd in record.rounds:
            entry = {
                "question": intern(question_ids, rnd.question),
                "answer": intern(answer_ids, rnd.answer),
                "answer_options": [intern(answer_ids, c) for c in rnd.candidates],
                "gt_index": rnd.gt_index,
            }
            if len(rnd.relevance) == len(rnd.candidates):
                entry["gt_relevance"] = list(rnd.relevance)
            rounds.append(entry)
        dialogs.append(
            {"image_id": record.dialog_id, "caption": " ".join(record.caption), "dialog": rounds}
        )
    document = {
        "data": {
            "questions": list(question_ids),
            "answers": list(answer_ids),
            "dialogs": dialogs,
        }
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=1), encoding="utf-8")
    images = {str(r.dialog_id): r.image for r in records if r.image is not None}
    if images:
        np.savez(sidecar_path(path), **images)
