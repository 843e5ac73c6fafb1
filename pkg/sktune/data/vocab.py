"""
Whitespace tokenizer and vocabulary.
"""

# Standard library
from collections import Counter
from typing import Iterable, List, Sequence

# Self
from . import param_data


__all__ = ["Vocab", "tokenize", "build_vocab", "standard_vocab"]


def tokenize(text: str) -> List[str]:
    """
    Split a text into lowercase tokens at whitespace.
    """
    return text.lower().split()


class Vocab:
    """
    Bijective mapping between tokens and integer IDs, where IDs 0, 1 and 2 are reserved for the
    padding, separator and unknown tokens, respectively.

    Parameters
    ----------
    tokens : Sequence[str]
        Non-reserved tokens, in the order of their IDs (starting at 3). Duplicates and reserved
        tokens are not allowed.
    """

    __slots__ = ("_id_to_token", "_token_to_id")

    def __init__(self, tokens: Sequence[str]):
        id_to_token = list(param_data.RESERVED_TOKENS) + list(tokens)
        token_to_id = {token: idx for idx, token in enumerate(id_to_token)}
        if len(token_to_id) != len(id_to_token):
            raise ValueError("Vocabulary tokens should be unique and not reserved.")
        self._id_to_token = tuple(id_to_token)
        self._token_to_id = token_to_id
        return

    @property
    def tokens(self) -> tuple:
        """All tokens, in the order of their IDs, reserved tokens included."""
        return self._id_to_token

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._id_to_token == other._id_to_token

    def __repr__(self) -> str:
        return f"Vocab(size={len(self)})"

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(token, param_data.UNK_ID)

    def token_of(self, idx: int) -> str:
        return self._id_to_token[idx]

    def encode(self, text: str) -> List[int]:
        """Tokenize a text and map each token to its ID; unseen tokens map to the unknown ID."""
        return [self.id_of(token) for token in tokenize(text)]

    def encode_tokens(self, tokens: Iterable[str]) -> List[int]:
        return [self.id_of(token.lower()) for token in tokens]

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self._id_to_token[int(idx)] for idx in ids]


def build_vocab(lines: Iterable[str], max_size: int, include: Iterable[str] = ()) -> Vocab:
    """
    Build a vocabulary from a corpus, keeping the most frequent tokens.

    Parameters
    ----------
    lines : Iterable[str]
        Corpus lines; each is tokenized with `tokenize`.
    max_size : int
        Maximum size of the vocabulary, reserved tokens included; at least 4.
    include : Iterable[str], optional; default: ()
        Texts whose tokens are always kept (e.g. the prompt of a method), regardless of their
        corpus frequency. They come right after the reserved tokens, in order of appearance.

    Returns
    -------
    Vocab
        Vocabulary whose remaining non-reserved tokens are sorted by decreasing frequency, with
        ties broken lexicographically.

    Raises
    ------
    ValueError
        When `max_size` is below 4, or the included tokens alone do not fit.
    """
    if max_size < 4:
        raise ValueError(f"`max_size` should be at least 4, but is {max_size}.")
    capacity = max_size - len(param_data.RESERVED_TOKENS)
    kept = list(dict.fromkeys(
        token
        for text in include
        for token in tokenize(text)
        if token not in param_data.RESERVED_TOKENS
    ))
    if len(kept) > capacity:
        raise ValueError(
            f"{len(kept)} included tokens do not fit into a vocabulary of size {max_size}."
        )
    skipped = set(param_data.RESERVED_TOKENS) | set(kept)
    counts = Counter(token for line in lines for token in tokenize(line) if token not in skipped)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return Vocab(kept + [token for token, _ in ranked[: capacity - len(kept)]])


def standard_vocab() -> Vocab:
    """
    Vocabulary of the desk-scale lexicon, covering the synthetic tasks and the best prompt text.
    Its tokens are in lexicographic order.
    """
    words = set(
        param_data.PROMPT_WORDS
        + param_data.POSITIVE_WORDS
        + param_data.NEGATIVE_WORDS
        + param_data.ENTITY_WORDS
        + param_data.FILLER_WORDS
    )
    return Vocab(sorted(words))
