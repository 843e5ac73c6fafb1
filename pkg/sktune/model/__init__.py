from .config import ModelConfig
from .transformer import FrozenModel, KvPrefix, ForwardOutput, init_params, param_shapes
from .pretraining import ngram_corpus, split_corpus, lm_loss, heldout_loss, pretrain
