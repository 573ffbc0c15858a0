import dataclasses

import numpy as np
import pytest

import fillerspot as fs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def registry():
    return fs.CategoryRegistry(filler_words=("um", "uh"), num_auxiliary=4)


@pytest.fixture
def desk_clips():
    """A small deterministic synthetic corpus."""
    return fs.generate_synth(fs.desk_synth_spec(seed=7, clips=6))


@pytest.fixture
def smoke_config():
    """Desk config cut down to a seconds-long smoke run."""
    cfg = fs.desk_config(seed=3, num_auxiliary=2)
    return dataclasses.replace(
        cfg,
        train=dataclasses.replace(
            cfg.train,
            total_epochs=4,
            lr_drop_epochs=(),
            schedule=dataclasses.replace(
                cfg.train.schedule, start_epoch=2, period_epochs=1, num_auxiliary=2
            ),
        ),
    )


def make_event(text="um", onset=1.0, duration=0.3, category_id=None):
    if category_id is None:
        category_id = fs.FILLER if text in ("um", "uh") else fs.NON_FILLER
    return fs.WordEvent(text=text, onset=onset, duration=duration, category_id=category_id)
