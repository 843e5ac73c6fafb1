"""
sktune: semantic-knowledge tuning of a frozen transformer, with the baseline parameter-efficient
fine-tuning methods, a numpy autodiff engine, training harness and ablation tooling.
"""

from . import tensor
from . import data
from . import model
from . import peft
from . import metrics
from . import train
from .exceptions import SktuneError


__version__ = "0.1.0"
