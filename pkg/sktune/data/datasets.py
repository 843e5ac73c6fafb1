"""
Supervised examples for the three task kinds: JSONL ingestion and emission, seeded synthetic
task generators, train/validation/test splitting and mini-batch collation.

JSONL schemas (UTF-8, one object per line):
    sequence   : {"text": str, "label": int}
    token      : {"tokens": [str, ...], "tags": [int, ...]}
    entailment : {"premise": str, "hypothesis": str, "label": int}
"""

# Standard library
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union
import json
import logging

# 3rd-party packages
import numpy as np

# Self
from . import param_data
from .vocab import Vocab, tokenize
from ..exceptions import (
    MalformedLineError,
    LengthMismatchError,
    UnknownLabelError,
    EmptyInputError,
)
from ..helpers import raise_for_fractions


__all__ = [
    "Example",
    "Batch",
    "resolve_task_kind",
    "load_jsonl",
    "write_jsonl",
    "read_texts",
    "gen_synthetic",
    "label_by_rule",
    "split",
    "collate",
    "iter_batches",
]


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Example:
    """
    One supervised instance.

    For entailment examples, `input_ids` holds the premise and `hypothesis_ids` the hypothesis;
    `label` is a tuple of tags (one per input token) for token examples, and an integer
    otherwise.
    """
    task_kind: str
    input_ids: Tuple[int, ...]
    label: Union[int, Tuple[int, ...]]
    hypothesis_ids: Optional[Tuple[int, ...]] = None

    @property
    def ids(self) -> Tuple[int, ...]:
        """Token IDs fed to the model; premise, separator and hypothesis for entailment."""
        if self.task_kind == "entailment":
            return self.input_ids + (param_data.SEP_ID,) + self.hypothesis_ids
        return self.input_ids


@dataclass(frozen=True)
class Batch:
    """
    Right-padded mini-batch.

    Attributes
    ----------
    ids : numpy.ndarray
        Token IDs of shape [b, n], padded with the padding ID.
    lengths : numpy.ndarray
        Number of real tokens in each row, shape [b].
    labels : numpy.ndarray
        Shape [b] for sequence and entailment tasks; shape [b, n] for token tasks, padded with -1.
    task_kind : str
    """
    ids: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray
    task_kind: str

    def __len__(self) -> int:
        return self.ids.shape[0]


def resolve_task_kind(task_kind: str) -> str:
    """
    Map a task kind or one of its CLI aliases ('seqcls', 'tokcls', 'nli') to the task kind.
    """
    task_kind = param_data.TASK_ALIASES.get(task_kind, task_kind)
    if task_kind not in param_data.TASK_KINDS:
        raise ValueError(f"Unknown task kind {task_kind!r}.")
    return task_kind


def _check_label(label, n_classes: int, lineno: int) -> int:
    if isinstance(label, bool) or not isinstance(label, int) or not 0 <= label < n_classes:
        raise UnknownLabelError(f"line {lineno}: label {label!r} is not in [0, {n_classes}).")
    return label


def load_jsonl(
    path: Union[str, Path],
    task_kind: str,
    vocab: Vocab,
    n_classes: Optional[int] = None,
) -> List[Example]:
    """
    Parse a JSONL file into examples, preserving the order of lines. Blank lines are skipped.

    Parameters
    ----------
    path : str or pathlib.Path
        Path to the file.
    task_kind : str
        Task kind (or alias) determining the schema of each line.
    vocab : Vocab
        Vocabulary used to map tokens to IDs.
    n_classes : int, optional
        Number of classes; defaults to the task kind's class count.

    Returns
    -------
    List[Example]

    Raises
    ------
    MalformedLineError, LengthMismatchError, UnknownLabelError
    """
    task_kind = resolve_task_kind(task_kind)
    n_classes = param_data.N_CLASSES[task_kind] if n_classes is None else n_classes
    examples = []
    with open(path, "r", encoding="utf-8") as file:
        for lineno, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedLineError(f"invalid JSON ({e.msg}).", lineno) from None
            if not isinstance(obj, dict):
                raise MalformedLineError("expected a JSON object.", lineno)
            try:
                if task_kind == "sequence":
                    example = Example(
                        task_kind,
                        tuple(vocab.encode(obj["text"])),
                        _check_label(obj["label"], n_classes, lineno),
                    )
                elif task_kind == "token":
                    tokens, tags = obj["tokens"], obj["tags"]
                    if len(tokens) != len(tags):
                        raise LengthMismatchError(
                            f"{len(tokens)} tokens but {len(tags)} tags.", lineno
                        )
                    example = Example(
                        task_kind,
                        tuple(vocab.encode_tokens(tokens)),
                        tuple(_check_label(tag, n_classes, lineno) for tag in tags),
                    )
                else:
                    example = Example(
                        task_kind,
                        tuple(vocab.encode(obj["premise"])),
                        _check_label(obj["label"], n_classes, lineno),
                        tuple(vocab.encode(obj["hypothesis"])),
                    )
            except (KeyError, TypeError, AttributeError) as e:
                raise MalformedLineError(f"missing or ill-typed field ({e}).", lineno) from None
            examples.append(example)
    logger.debug(f"Loaded {len(examples)} {task_kind} examples from {path}.")
    return examples


def write_jsonl(examples: Sequence[Example], path: Union[str, Path], vocab: Vocab) -> None:
    """
    Write examples to a JSONL file, with the keys of each line in schema order.
    """
    with open(path, "w", encoding="utf-8") as file:
        for example in examples:
            if example.task_kind == "sequence":
                obj = {"text": " ".join(vocab.decode(example.input_ids)), "label": example.label}
            elif example.task_kind == "token":
                obj = {"tokens": vocab.decode(example.input_ids), "tags": list(example.label)}
            else:
                obj = {
                    "premise": " ".join(vocab.decode(example.input_ids)),
                    "hypothesis": " ".join(vocab.decode(example.hypothesis_ids)),
                    "label": example.label,
                }
            file.write(json.dumps(obj) + "\n")
    return


def read_texts(path: Union[str, Path], task_kind: str) -> List[str]:
    """
    Collect the raw texts of a JSONL file (for building a vocabulary), skipping lines that cannot
    be parsed; `load_jsonl` reports those.
    """
    task_kind = resolve_task_kind(task_kind)
    texts = []
    with open(path, "r", encoding="utf-8") as file:
        for line in file:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                continue
            if not isinstance(obj, dict):
                continue
            if task_kind == "sequence":
                texts.append(str(obj.get("text", "")))
            elif task_kind == "token":
                texts.append(" ".join(str(token) for token in obj.get("tokens", [])))
            else:
                texts.append(f"{obj.get('premise', '')} {obj.get('hypothesis', '')}")
    return texts


def _balanced_flags(n: int, rng: np.random.Generator) -> np.ndarray:
    # Alternating flags, shuffled; the counts of both values differ by at most one
    return rng.permutation(np.arange(n) % 2)


def _ids(vocab: Vocab, words: Sequence[str]) -> Tuple[int, ...]:
    return tuple(vocab.id_of(word) for word in words)


def gen_synthetic(task_kind: str, n: int, seed: int, vocab: Vocab) -> List[Example]:
    """
    Generate a label-balanced synthetic dataset, whose labels follow a simple rule
    (see `label_by_rule`).

    Every task places the token that decides the label where a causal encoder reads it out: the
    last position for the sentence-level tasks, and the token itself for the tagging task.

    sequence
        Keyword sentiment: label 1 iff one of the positive keywords occurs among noise words;
        in positive examples the keyword ends the sentence.
    token
        BIO tagging (O=0, B=1, I=2) of entity runs (single names such as "paris", or fixed
        pairs such as "new york"); half of the examples contain one run.
    entailment
        Label 1 iff every hypothesis token occurs in the premise. Premises draw from
        `PREMISE_WORDS`, and a non-entailed hypothesis ends with a word of `OUTSIDE_WORDS`.

    Parameters
    ----------
    task_kind : str
        Task kind or alias.
    n : int
        Number of examples; at least 1.
    seed : int
        Seed of the random number generator.
    vocab : Vocab
        Vocabulary containing the desk-scale lexicon (see `standard_vocab`).

    Returns
    -------
    List[Example]
    """
    task_kind = resolve_task_kind(task_kind)
    if n < 1:
        raise ValueError(f"`n` should be at least 1, but is {n}.")
    missing = [
        word
        for word in param_data.POSITIVE_WORDS + param_data.NEGATIVE_WORDS
        + param_data.ENTITY_WORDS + param_data.FILLER_WORDS
        if word not in vocab
    ]
    if missing:
        raise ValueError(f"Vocabulary lacks words of the synthetic lexicon: {missing}.")
    rng = np.random.default_rng(seed)
    flags = _balanced_flags(n, rng)
    noise = param_data.FILLER_WORDS + param_data.NEGATIVE_WORDS
    examples = []
    for flag in flags:
        if task_kind == "sequence":
            words = list(rng.choice(noise, size=int(rng.integers(3, 7))))
            if flag:
                words[-1] = rng.choice(param_data.POSITIVE_WORDS)
            examples.append(Example(task_kind, _ids(vocab, words), int(flag)))
        elif task_kind == "token":
            words = list(rng.choice(param_data.FILLER_WORDS, size=int(rng.integers(4, 9))))
            tags = [param_data.TAG_O] * len(words)
            if flag:
                run = list(param_data.ENTITY_RUNS[int(rng.integers(len(param_data.ENTITY_RUNS)))])
                start = int(rng.integers(len(words) + 1))
                words[start:start] = run
                tags[start:start] = [param_data.TAG_B] + [param_data.TAG_I] * (len(run) - 1)
            examples.append(Example(task_kind, _ids(vocab, words), tuple(tags)))
        else:
            premise = list(
                rng.choice(param_data.PREMISE_WORDS, size=int(rng.integers(3, 6)), replace=False)
            )
            size = int(rng.integers(1, 3))
            if flag:
                hypothesis = list(rng.choice(premise, size=size, replace=False))
            else:
                hypothesis = [rng.choice(param_data.OUTSIDE_WORDS)]
                if size == 2:
                    hypothesis.insert(0, rng.choice(premise))
            examples.append(
                Example(task_kind, _ids(vocab, premise), int(flag), _ids(vocab, hypothesis))
            )
    return examples


def label_by_rule(example: Example, vocab: Vocab) -> Union[int, Tuple[int, ...]]:
    """
    Label an example by the rule generating the synthetic tasks.
    """
    if example.task_kind == "sequence":
        positives = set(_ids(vocab, param_data.POSITIVE_WORDS))
        return int(any(idx in positives for idx in example.input_ids))
    if example.task_kind == "token":
        entities = set(_ids(vocab, param_data.ENTITY_WORDS))
        tags, previous = [], False
        for idx in example.input_ids:
            is_entity = idx in entities
            if not is_entity:
                tags.append(param_data.TAG_O)
            else:
                tags.append(param_data.TAG_I if previous else param_data.TAG_B)
            previous = is_entity
        return tuple(tags)
    return int(set(example.hypothesis_ids) <= set(example.input_ids))


def split(
    examples: Sequence[Example],
    fractions: Sequence[float] = param_data.SPLIT_FRACTIONS,
    seed: int = 0,
) -> Tuple[List[Example], List[Example], List[Example]]:
    """
    Shuffle examples with a seed and cut them into contiguous train, validation and test parts.

    Raises
    ------
    BadFractionsError
    """
    raise_for_fractions(fractions)
    n = len(examples)
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(n, int(round(fractions[0] * n)))
    n_val = min(n - n_train, int(round(fractions[1] * n)))
    shuffled = [examples[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:n_train + n_val], shuffled[n_train + n_val:]


def collate(examples: Sequence[Example]) -> Batch:
    """
    Pack examples of the same task kind into a right-padded batch.
    """
    if len(examples) == 0:
        raise EmptyInputError("Cannot collate an empty list of examples.")
    task_kind = examples[0].task_kind
    sequences = [example.ids for example in examples]
    lengths = np.array([len(seq) for seq in sequences], dtype=np.int64)
    ids = np.full((len(examples), int(lengths.max())), param_data.PAD_ID, dtype=np.int64)
    for row, seq in enumerate(sequences):
        ids[row, : len(seq)] = seq
    if task_kind == "token":
        labels = np.full(ids.shape, param_data.IGNORE_LABEL, dtype=np.int64)
        for row, example in enumerate(examples):
            labels[row, : len(example.label)] = example.label
    else:
        labels = np.array([example.label for example in examples], dtype=np.int64)
    return Batch(ids=ids, lengths=lengths, labels=labels, task_kind=task_kind)


def iter_batches(
    examples: Sequence[Example],
    batch_size: int,
    rng: Optional[np.random.Generator] = None,
) -> Iterator[Batch]:
    """
    Yield consecutive mini-batches, in a random order when a generator is given.
    """
    order = np.arange(len(examples)) if rng is None else rng.permutation(len(examples))
    for start in range(0, len(examples), batch_size):
        yield collate([examples[i] for i in order[start:start + batch_size]])
