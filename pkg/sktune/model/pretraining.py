"""
Synthetic pretraining of the frozen model: a seeded 4-gram language, next-token language-modeling
loss with the output layer tied to the token embeddings, and an AdamW training loop.
"""

# Standard library
from typing import List, Sequence, Tuple
import logging

# 3rd-party packages
import numpy as np

# Self
from .. import helpers
from .. import tensor as T
from ..data import param_data
from ..exceptions import EmptyInputError
from ..optim import OptimState, adamw_step
from ..tensor import Tensor
from .config import ModelConfig
from .transformer import FrozenModel


__all__ = ["ngram_corpus", "split_corpus", "lm_loss", "heldout_loss", "pretrain"]


logger = logging.getLogger(__name__)

N_CONTEXTS = 97
N_CANDIDATES = 4


def ngram_corpus(vocab_size: int, n_sequences: int, seq_len: int, seed: int) -> List[List[int]]:
    """
    Sample sequences from a seeded synthetic 4-gram language.

    Each context of three preceding tokens (a, b, c) is hashed to (31a + 17b + c) mod 97, and each
    of the 97 hash buckets owns a sparse next-token distribution: four candidate tokens drawn from
    the non-reserved IDs, with probabilities drawn from a symmetric Dirichlet(0.5) distribution.

    Parameters
    ----------
    vocab_size : int
        Size of the vocabulary; tokens are drawn from [3, vocab_size).
    n_sequences : int
        Number of sequences.
    seq_len : int
        Length of each sequence; at least 4.
    seed : int
        Seed of the language and of the sampling.

    Returns
    -------
    List[List[int]]
    """
    if seq_len < 4:
        raise ValueError(f"`seq_len` should be at least 4, but is {seq_len}.")
    first = len(param_data.RESERVED_TOKENS)
    if vocab_size <= first:
        raise ValueError(f"`vocab_size` should exceed {first}.")
    rng = np.random.default_rng(seed)
    candidates = rng.integers(first, vocab_size, size=(N_CONTEXTS, N_CANDIDATES))
    probs = rng.dirichlet(np.full(N_CANDIDATES, 0.5), size=N_CONTEXTS)
    corpus = []
    for _ in range(n_sequences):
        seq = [int(token) for token in rng.integers(first, vocab_size, size=3)]
        while len(seq) < seq_len:
            bucket = (31 * seq[-3] + 17 * seq[-2] + seq[-1]) % N_CONTEXTS
            seq.append(int(candidates[bucket, rng.choice(N_CANDIDATES, p=probs[bucket])]))
        corpus.append(seq)
    return corpus


def split_corpus(
    corpus: Sequence[Sequence[int]],
    heldout_fraction: float = param_data.PRETRAIN_HELDOUT_FRACTION,
) -> Tuple[List[Sequence[int]], List[Sequence[int]]]:
    """
    Split a corpus into a training part and a held-out tail (at least one sequence each).
    """
    if len(corpus) < 2:
        raise EmptyInputError("The corpus needs at least two sequences.")
    n_heldout = min(len(corpus) - 1, max(1, int(round(len(corpus) * heldout_fraction))))
    return list(corpus[:-n_heldout]), list(corpus[-n_heldout:])


def lm_loss(model: FrozenModel, sequences: Sequence[Sequence[int]]) -> Tensor:
    """
    Mean next-token cross-entropy over all positions that have a successor, with logits
    computed as hidden states times the transposed token-embedding matrix.

    Parameters
    ----------
    model : FrozenModel
    sequences : Sequence[Sequence[int]]
        Token sequences, each of length at least 2 (longer ones are truncated to `max_seq`).

    Returns
    -------
    Tensor
        Scalar loss.
    """
    max_seq = model.config.max_seq
    sequences = [list(seq)[:max_seq] for seq in sequences]
    if not sequences or min(len(seq) for seq in sequences) < 2:
        raise EmptyInputError("Every sequence needs at least two tokens.")
    lengths = np.array([len(seq) for seq in sequences])
    n = int(lengths.max())
    ids = np.full((len(sequences), n), param_data.PAD_ID, dtype=np.int64)
    for row, seq in enumerate(sequences):
        ids[row, : len(seq)] = seq
    helpers.raise_for_token_ids(ids, model.config.vocab_size, "corpus")
    params = model.params
    hidden = model.forward(model.embed(ids)).hidden
    logits = T.matmul(hidden, T.transpose(params["token_emb"], (1, 0)))
    flat = T.reshape(logits, (len(sequences) * n, model.config.vocab_size))
    rows = np.concatenate([row * n + np.arange(length - 1) for row, length in enumerate(lengths)])
    targets = np.concatenate([ids[row, 1:length] for row, length in enumerate(lengths)])
    return T.cross_entropy(T.take(flat, rows), targets)


def pretrain(
    config: ModelConfig,
    corpus: Sequence[Sequence[int]],
    steps: int = param_data.PRETRAIN_STEPS,
    lr: float = param_data.PRETRAIN_LR,
    batch_size: int = param_data.BATCH_SIZE,
    heldout_fraction: float = param_data.PRETRAIN_HELDOUT_FRACTION,
    log_every: int = 50,
) -> FrozenModel:
    """
    Train a seeded randomly initialized model on a corpus by next-token prediction, and return it
    frozen. With `steps` equal to 0, the seeded initialization is returned unchanged.

    Parameters
    ----------
    config : ModelConfig
        Configuration (and initialization seed) of the model.
    corpus : Sequence[Sequence[int]]
        Token sequences; the tail given by `heldout_fraction` is reserved for evaluation.
    steps : int
        Number of optimizer steps.
    lr : float
        Learning rate of AdamW.
    batch_size : int
        Number of sequences sampled (with replacement, seeded) per step.
    heldout_fraction : float
        Fraction of the corpus held out.
    log_every : int
        Interval (in steps) of progress logging.

    Returns
    -------
    FrozenModel

    Raises
    ------
    TokenOutOfRangeError
    """
    helpers.raise_for_positive(steps, "steps", allow_zero=True)
    for seq in corpus:
        helpers.raise_for_token_ids(helpers.as_id_array(seq), config.vocab_size, "corpus")
    model = FrozenModel(config)
    if steps == 0:
        return model
    train_part, heldout = split_corpus(corpus, heldout_fraction)
    model.unfreeze()
    params = list(model.params.values())
    state = OptimState(params, lr=lr)
    rng = np.random.default_rng([config.seed, 1])
    for step in range(steps):
        batch = [train_part[i] for i in rng.integers(0, len(train_part), size=batch_size)]
        T.zero_grad(params)
        loss = lm_loss(model, batch)
        T.backward(loss)
        adamw_step(params, [p.grad for p in params], state)
        if log_every and step % log_every == 0:
            logger.info(f"pretrain step {step}: loss {loss.item():.4f}")
    model.freeze()
    logger.info(f"Held-out LM loss after {steps} steps: {heldout_loss(model, heldout):.4f}")
    return model


def heldout_loss(model: FrozenModel, heldout: Sequence[Sequence[int]]) -> float:
    with T.no_grad():
        return lm_loss(model, heldout).item()
