"""
Fixtures shared by several test modules.
"""

# 3rd-party packages
import pytest

# Self
from sktune.data import param_data
from sktune.model import ModelConfig, ngram_corpus, split_corpus, pretrain


@pytest.fixture(scope="session")
def pretrain_corpus():
    """Synthetic 4-gram corpus of the reference model, split into (train, held-out)."""
    corpus = ngram_corpus(
        param_data.REFERENCE_MODEL["vocab_size"],
        param_data.PRETRAIN_SEQUENCES,
        param_data.PRETRAIN_SEQ_LEN,
        seed=0,
    )
    return corpus, split_corpus(corpus)


@pytest.fixture(scope="session")
def pretrained_model(pretrain_corpus):
    """Reference model pretrained with the default number of steps, frozen."""
    corpus, _ = pretrain_corpus
    return pretrain(ModelConfig(), corpus, log_every=0)
