"""
Helper functions used by all modules, mainly for verifying input arguments.
"""

# Standard library
from typing import Sequence, Union

# 3rd-party packages
import numpy as np

# Self
from .exceptions import (
    TokenOutOfRangeError,
    SequenceTooLongError,
    SequenceEmptyError,
    BadFractionsError,
)


def raise_for_token_ids(ids: np.ndarray, vocab_size: int, param_name: str = "ids") -> None:
    """
    Verify that an array of token IDs has an integer type and only contains values in the range
    [0, vocab_size), and raise an error otherwise.

    Parameters
    ----------
    ids : numpy.ndarray
        Array of token IDs with arbitrary shape.
    vocab_size : int
        Size of the vocabulary of the model.
    param_name : str
        Name of the parameter to which `ids` is bound; to be mentioned in the error message.

    Returns
    -------
        None

    Raises
    ------
    TypeError, TokenOutOfRangeError
    """
    if ids.size == 0:
        return
    if ids.dtype.kind not in np.typecodes["AllInteger"]:
        raise TypeError(f"Data-type of `{param_name}` should be integer.")
    lowest, highest = int(ids.min()), int(ids.max())
    if lowest < 0 or highest >= vocab_size:
        bad = lowest if lowest < 0 else highest
        raise TokenOutOfRangeError(
            f"Token ID {bad} in `{param_name}` lies outside the vocabulary range [0, {vocab_size})."
        )
    return


def raise_for_sequence_length(length: int, max_seq: int, param_name: str = "sequence") -> None:
    """
    Verify that a sequence is non-empty and fits into the model's context.

    Parameters
    ----------
    length : int
        Length of the sequence.
    max_seq : int
        Maximum number of positions supported by the model.
    param_name : str
        Name of the sequence; to be mentioned in the error message.

    Returns
    -------
        None

    Raises
    ------
    SequenceEmptyError, SequenceTooLongError
    """
    if length < 1:
        raise SequenceEmptyError(f"`{param_name}` should contain at least one token.")
    if length > max_seq:
        raise SequenceTooLongError(
            f"`{param_name}` has length {length}, but the model supports at most {max_seq} "
            "positions."
        )
    return


def raise_for_fractions(fractions: Sequence[float], tol: float = 1e-9) -> None:
    """
    Verify that a triple of split fractions is non-negative and sums to 1.

    Parameters
    ----------
    fractions : Sequence[float]
        Fractions of the train, validation and test splits.
    tol : float
        Tolerance for the deviation of the sum from 1.

    Returns
    -------
        None

    Raises
    ------
    BadFractionsError
    """
    if len(fractions) != 3:
        raise BadFractionsError("Exactly three fractions (train, val, test) are expected.")
    if any(f < 0 for f in fractions):
        raise BadFractionsError(f"Fractions should be non-negative, but got {tuple(fractions)}.")
    if abs(sum(fractions) - 1) > tol:
        raise BadFractionsError(f"Fractions should sum to 1, but sum to {sum(fractions)}.")
    return


def raise_for_positive(value: Union[int, float], param_name: str, allow_zero: bool = False):
    """
    Verify that a number is positive (or non-negative, when `allow_zero` is set).

    Raises
    ------
    ValueError
    """
    if value < 0 or (value == 0 and not allow_zero):
        qualifier = "non-negative" if allow_zero else "positive"
        raise ValueError(f"Parameter `{param_name}` should be {qualifier}, but is {value}.")
    return


def as_id_array(ids: Union[Sequence[int], np.ndarray]) -> np.ndarray:
    """
    Transform a sequence of token IDs into an integer numpy array.
    An empty sequence yields an empty int64 array.
    """
    arr = np.asarray(ids)
    if arr.size == 0:
        return np.zeros(arr.shape, dtype=np.int64)
    if arr.dtype.kind not in np.typecodes["AllInteger"]:
        raise TypeError("Token IDs should be integers.")
    return arr.astype(np.int64, copy=False)
