"""Truncation, id mapping and right-padding of dialogs into batches."""
from typing import List, Sequence

import numpy as np

from uqrank.domain_model.records import PAD, Batch, DialogRecord, Limits, Tokens, Vocab
from uqrank.globals.errors import UsageError
from uqrank.globals.problems import Problems
from uqrank.globals.process_stage import ProcessStage

MAX_ROUNDS = 10


class Batcher(ProcessStage[Sequence[DialogRecord], List[Batch]]):
    """Groups consecutive records into batches of ``batch_size`` dialogs."""

    def __init__(
        self, problems: Problems, vocab: Vocab, limits: Limits = Limits(), batch_size: int = 8
    ) -> None:
        super().__init__(problems)
        if batch_size < 1:
            raise UsageError("batch_size must be >= 1")
        self.vocab = vocab
        self.limits = limits
        self.batch_size = batch_size

    def process(self, records: Sequence[DialogRecord]) -> List[Batch]:
        return [
            self._batch(records[start : start + self.batch_size])
            for start in range(0, len(records), self.batch_size)
        ]

    def _ids(self, tokens: Tokens, limit: int, where: str) -> List[int]:
        if len(tokens) > limit:
            self.report(where, f"{len(tokens)} tokens truncated to {limit}", "truncate")
        return self.vocab.encode(tokens[:limit])

    def _batch(self, records: Sequence[DialogRecord]) -> Batch:
        b = len(records)
        n_rounds = []
        for record in records:
            if len(record.rounds) > MAX_ROUNDS:
                self.report(
                    f"dialog {record.dialog_id}",
                    f"{len(record.rounds)} rounds truncated to {MAX_ROUNDS}",
                    "truncate",
                )
            n_rounds.append(min(len(record.rounds), MAX_ROUNDS))
        r_max = max(n_rounds) if n_rounds else 0
        k_max = max(
            (len(rnd.candidates) for rec in records for rnd in rec.rounds[:MAX_ROUNDS]),
            default=0,
        )

        captions = [
            self._ids(rec.caption, self.limits.caption, f"dialog {rec.dialog_id}")
            for rec in records
        ]
        lc = max((len(c) for c in captions), default=0)
        batch = Batch(
            dialog_ids=[rec.dialog_id for rec in records],
            images=self._images(records),
            captions=np.full((b, max(lc, 1)), PAD, dtype=np.int64),
            caption_lengths=np.zeros(b, dtype=np.int64),
            questions=np.full((b, r_max, self.limits.question), PAD, dtype=np.int64),
            question_lengths=np.zeros((b, r_max), dtype=np.int64),
            answers=np.full((b, r_max, self.limits.answer), PAD, dtype=np.int64),
            answer_lengths=np.zeros((b, r_max), dtype=np.int64),
            candidates=np.full((b, r_max, k_max, self.limits.answer), PAD, dtype=np.int64),
            candidate_lengths=np.zeros((b, r_max, k_max), dtype=np.int64),
            num_candidates=np.zeros((b, r_max), dtype=np.int64),
            gt_index=np.zeros((b, r_max), dtype=np.int64),
            relevance=np.zeros((b, r_max, k_max)),
            round_mask=np.zeros((b, r_max)),
        )
        for i, rec in enumerate(records):
            batch.captions[i, : len(captions[i])] = captions[i]
            batch.caption_lengths[i] = len(captions[i])
            for r, rnd in enumerate(rec.rounds[:MAX_ROUNDS]):
                where = f"dialog {rec.dialog_id} round {r}"
                q = self._ids(rnd.question, self.limits.question, where)
                a = self._ids(rnd.answer, self.limits.answer, where)
                batch.questions[i, r, : len(q)] = q
                batch.question_lengths[i, r] = len(q)
                batch.answers[i, r, : len(a)] = a
                batch.answer_lengths[i, r] = len(a)
                for k, cand in enumerate(rnd.candidates):
                    ids = self.vocab.encode(cand[: self.limits.answer])
                    batch.candidates[i, r, k, : len(ids)] = ids
                    batch.candidate_lengths[i, r, k] = len(ids)
                batch.num_candidates[i, r] = len(rnd.candidates)
                batch.gt_index[i, r] = rnd.gt_index
                if len(rnd.relevance) == len(rnd.candidates):
                    batch.relevance[i, r, : len(rnd.relevance)] = rnd.relevance
                else:
                    batch.relevance[i, r, rnd.gt_index] = 1.0
                batch.round_mask[i, r] = 1.0
        return self._trim(batch)

    def _images(self, records: Sequence[DialogRecord]):
        if not records or any(rec.image is None for rec in records):
            return None
        return np.stack([rec.image for rec in records])

    @staticmethod
    def _trim(batch: Batch) -> Batch:
        """Pad token axes to the batch maximum instead of the limit."""
        lq = max(int(batch.question_lengths.max(initial=0)), 1)
        la = max(
            int(batch.answer_lengths.max(initial=0)),
            int(batch.candidate_lengths.max(initial=0)),
            1,
        )
        batch.questions = batch.questions[:, :, :lq]
        batch.answers = batch.answers[:, :, :la]
        batch.candidates = batch.candidates[:, :, :, :la]
        return batch


def truncate_and_batch(
    records: Sequence[DialogRecord],
    vocab: Vocab,
    limits: Limits = Limits(),
    batch_size: int = 8,
    problems: Problems | None = None,
) -> List[Batch]:
    """
    Clip sequences to ``limits`` (caption, question, answer), map tokens to ids and pad
    each batch to its longest sequence; lengths are kept alongside the padded arrays.
    """
    collected = problems if problems is not None else Problems()
    return Batcher(collected, vocab, limits, batch_size).process(records)
