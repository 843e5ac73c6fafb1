"""
This module contains the default values of all configurable quantities, together with the
desk-scale lexicon from which the synthetic tasks and the standard vocabulary are built.
"""

# Standard library
from pathlib import Path

# 3rd-party packages
import pandas as pd


# Reserved token IDs and their surface forms
PAD_ID = 0
SEP_ID = 1
UNK_ID = 2
RESERVED_TOKENS = ("<pad>", "<sep>", "<unk>")

# Task kinds, their CLI aliases and class counts
TASK_KINDS = ("sequence", "token", "entailment")
TASK_ALIASES = {"seqcls": "sequence", "tokcls": "token", "nli": "entailment"}
N_CLASSES = {"sequence": 2, "token": 3, "entailment": 2}

# Tags of the synthetic token task
TAG_O, TAG_B, TAG_I = 0, 1, 2
# Label of the entailment task denoting entailment
LABEL_ENTAIL = 1
# Fill value of padded token-task labels
IGNORE_LABEL = -1

# Training protocol
LEARNING_RATES = {"sequence": 1e-3, "token": 1e-3, "entailment": 1e-3}
EPOCHS = {"sequence": 3, "token": 10, "entailment": 10}
BATCH_SIZE = 16
LOSS_THRESHOLD = 0.2
WEIGHT_DECAY = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
SPLIT_FRACTIONS = (0.7, 0.1, 0.2)

# Method defaults
N_VIRTUAL = 20
VIRTUAL_INIT_STD = 0.02
ADAPTER_BOTTLENECK = 4
ADAPTER_LAYERS = 1
LORA_RANKS = {"lora2": 2, "lora4": 4}

# Reference model configuration
REFERENCE_MODEL = dict(
    vocab_size=64, d_model=32, n_layers=2, n_heads=4, d_ffn=64, max_seq=48, ln_eps=1e-5
)
# Model used by the gradient check
GRADCHECK_MODEL = dict(
    vocab_size=64, d_model=8, n_layers=2, n_heads=2, d_ffn=16, max_seq=32, ln_eps=1e-5
)

# Pretraining defaults
PRETRAIN_STEPS = 500
PRETRAIN_LR = 3e-3
PRETRAIN_SEQUENCES = 512
PRETRAIN_SEQ_LEN = 16
PRETRAIN_HELDOUT_FRACTION = 0.1

# Desk-scale lexicon
PROMPT_WORDS = ("classify", "the", "positive", "or", "negative", "sentiment", "of", "text:")
POSITIVE_WORDS = ("love", "great", "good", "excellent", "wonderful", "amazing")
NEGATIVE_WORDS = ("hate", "bad", "awful", "boring", "dull", "terrible")
ENTITY_RUNS = (
    ("paris",), ("london",), ("tokyo",), ("berlin",), ("rome",),
    ("new", "york"), ("hong", "kong"), ("los", "angeles"),
)
ENTITY_WORDS = tuple(word for run in ENTITY_RUNS for word in run)
# Premises of the entailment task only use the first group; the second never occurs in them
PREMISE_WORDS = (
    "i", "this", "movie", "film", "plot", "story", "was", "is", "a", "it", "and",
)
OUTSIDE_WORDS = (
    "very", "really", "we", "they", "saw", "watched", "city", "visited", "in", "today", "text",
)
FILLER_WORDS = PREMISE_WORDS + OUTSIDE_WORDS

# Prompt texts of the prompt-effect ablation, with the best-performing one flagged
prompt_texts = pd.read_csv(Path(__file__).parent / "prompt_texts.csv")
BEST_PROMPT = prompt_texts.loc[prompt_texts["best"], "text"].iloc[0]

FIG_INPUT = "I love this movie"
