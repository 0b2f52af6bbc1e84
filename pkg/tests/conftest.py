import pytest
from hypothesis import settings

from revrec.corpus import build_log
from revrec.events import ReviewEvent
from revrec.featurize import CandidatePolicy
from revrec.index import EventIndex
from revrec.ranker import HyperParams, train_lambdamart
from revrec.featurize import build_training_set
from revrec.synth import SynthConfig, synth_corpus

settings.register_profile("suite", max_examples=60, deadline=None)
settings.load_profile("suite")

HOUR = 3600
DAY = 86400


def ev(kind, ts, engineer, diff_id=None, **kw):
    return ReviewEvent(kind=kind, ts=ts, engineer=engineer, diff_id=diff_id, **kw)


@pytest.fixture(scope="session")
def small_cfg():
    return SynthConfig(n_engineers=60, n_files=80, n_diffs=1500, n_teams=6, seed=3)


@pytest.fixture(scope="session")
def small_log(small_cfg):
    return synth_corpus(small_cfg)


@pytest.fixture(scope="session")
def small_idx(small_log):
    return EventIndex(small_log)


@pytest.fixture(scope="session")
def small_model(small_log, small_idx):
    ds = build_training_set(small_log, CandidatePolicy(), index=small_idx)
    return train_lambdamart(ds, HyperParams(n_trees=12, max_leaves=8, seed=1))
