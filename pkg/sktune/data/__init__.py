from . import param_data
from .vocab import Vocab, tokenize, build_vocab, standard_vocab
from .datasets import (
    Example,
    Batch,
    resolve_task_kind,
    load_jsonl,
    write_jsonl,
    read_texts,
    gen_synthetic,
    label_by_rule,
    split,
    collate,
    iter_batches,
)
