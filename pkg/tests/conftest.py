"""Shared test configuration and fixtures for uqrank tests."""

from pathlib import Path

import pytest

from uqrank.autodiff.rng import RngStream
from uqrank.domain_model.records import DialogRecord, DialogRound, SyntheticTaskSpec, Vocab
from uqrank.globals import problems
from uqrank.globals.run_config import RunConfig
from uqrank.pipeline_stages.batcher import truncate_and_batch

FIXTURES = Path(__file__).parent / "fixtures"


def tiny_run_config(**changes):
    """Run config small enough to train and evaluate in a few seconds."""
    config = RunConfig(
        epochs=1,
        batch_size=2,
        t_mc=2,
        t_lrt=2,
        k_latent=3,
        embed_dim=4,
        hidden_dim=4,
        z_dim=4,
        trunk_dim=6,
        num_candidates=4,
        min_count=1,
        train_dialogs=4,
        val_dialogs=2,
        rounds_per_dialog=2,
        diversity_samples=3,
        diversity_dialogs=2,
        conv_dropout=(0.1, 0.2),
    )
    return config.with_overrides(**changes)


@pytest.fixture
def tiny_config():
    """The tiny run config."""
    return tiny_run_config()


@pytest.fixture
def tiny_spec():
    """Synthetic task spec matching the tiny config's data."""
    return SyntheticTaskSpec(seed=3, num_dialogs=4, rounds_per_dialog=3, num_candidates=6)


@pytest.fixture
def visdial_dir():
    """Directory of hand-written VisDial-schema files."""
    return FIXTURES / "visdial"


@pytest.fixture
def test_problems():
    """Empty problems collection for testing."""
    return problems.Problems()


def make_record(dialog_id=0, rounds=1, image=None, caption=("a", "red", "square")):
    """A small hand-made dialog about a red square."""
    rnd = DialogRound(
        question=("what", "color", "is", "the", "square", "?"),
        answer=("red",),
        candidates=(("blue",), ("red",), ("it", "is", "red")),
        gt_index=1,
        relevance=(0.0, 1.0, 0.5),
    )
    return DialogRecord(dialog_id, image, tuple(caption), (rnd,) * rounds)


def vocab_of(records):
    """Vocabulary holding every token of ``records``, candidates included."""
    tokens = []
    for record in records:
        tokens.extend(record.caption)
        for rnd in record.rounds:
            tokens.extend(rnd.question)
            tokens.extend(rnd.answer)
            for candidate in rnd.candidates:
                tokens.extend(candidate)
    return Vocab.from_tokens(sorted(set(tokens)))


def make_batches(dialogs=3, rounds=2, batch_size=2, seed=0):
    """Vocabulary and batches of hand-made dialogs with random 32 px images."""
    rng = RngStream(seed)
    records = [
        make_record(i, rounds=rounds, image=rng.uniform((3, 32, 32))) for i in range(dialogs)
    ]
    vocab = vocab_of(records)
    return vocab, truncate_and_batch(records, vocab, batch_size=batch_size)
