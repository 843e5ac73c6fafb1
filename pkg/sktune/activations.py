"""
Module containing classes representing the activation functions used inside the transformer
feed-forward blocks and all small adapter networks.
"""

# Standard library
from typing import Tuple
import math  # Used only in `_gelu_test`.

# 3rd-party packages
import numpy as np
from scipy import special


class Activation:
    """
    Superclass for all activation function classes.
    Calling an activation returns its value together with its derivative, both elementwise.
    """
    def __call__(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        pass

    @property
    def name(self) -> str:
        return type(self).__name__.lower()


class Gelu(Activation):
    """
    Exact Gaussian error linear unit with the formula
    GELU(x) = x Φ(x) = 0.5 x [1 + erf(x / √2)]
    where 'Φ' is the cumulative distribution function of the standard normal distribution.
    Its derivative is
    GELU'(x) = Φ(x) + x φ(x)
    where 'φ' is the standard normal density.
    """
    def __init__(self):
        # Calculate recurring terms to use in each call
        self._inv_sqrt2 = 1 / np.sqrt(2)
        self._inv_sqrt_2pi = 1 / np.sqrt(2 * np.pi)
        return

    def __call__(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        cdf = 0.5 * (1 + special.erf(x * self._inv_sqrt2))
        pdf = self._inv_sqrt_2pi * np.exp(-0.5 * x * x)
        return x * cdf, cdf + x * pdf

    def _gelu_test(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Calculate the value of GELU and its derivative elementwise with the `math` module, using a
        non-vectorized implementation, for testing purposes.

        Parameters
        ----------
        x : numpy.ndarray

        Returns
        -------
        value, derivative : Tuple[numpy.ndarray, numpy.ndarray]
        """
        flat = np.asarray(x, dtype=np.float64).ravel()
        value = np.empty_like(flat)
        derivative = np.empty_like(flat)
        for i, x_i in enumerate(flat):
            cdf = 0.5 * (1 + math.erf(x_i / math.sqrt(2)))
            pdf = math.exp(-(x_i ** 2) / 2) / math.sqrt(2 * math.pi)
            value[i] = x_i * cdf
            derivative[i] = cdf + x_i * pdf
        return value.reshape(np.shape(x)), derivative.reshape(np.shape(x))


gelu = Gelu()
