"""
Command-line interface of sktune.

Subcommands:
    pretrain   Pretrain a frozen model on the synthetic 4-gram language and save it.
    train      Train one fine-tuning method on a task, and write its artifacts.
    compare    Train several methods over several seeds, and write per-run and median tables.
    gradcheck  Verify all gradients against finite differences.
    attn       Export the attention map of a semantic prompt over an input.
    params     Print the trainable-parameter and memory accounting of a method.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 numeric abort, 4 verification failure.
"""

# Standard library
from __future__ import annotations
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import argparse
import logging
import os
import sys

# 3rd-party packages
import numpy as np
import pandas as pd

# Self
from . import checkpoint, gradcheck, metrics
from .data import (
    param_data,
    Example,
    Vocab,
    standard_vocab,
    build_vocab,
    read_texts,
    load_jsonl,
    gen_synthetic,
    split,
    collate,
    resolve_task_kind,
)
from .exceptions import CheckpointFormatError, NonFiniteError, SktuneError
from .model import FrozenModel, ModelConfig, ngram_corpus, split_corpus, heldout_loss, pretrain
from .peft import METHOD_KINDS, PeftMethod, SKPrompt, create_method
from .train import HyperParams, TrainRun, train, efficiency_report


__all__ = ["main", "build_parser", "RunConfig"]


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_VERIFICATION = 4

GRADCHECK_TOLERANCE = 1e-4
DEFAULT_SYNTHETIC = 400

RUN_CSV = "run.csv"
ADAPTER_JSON = "adapter.json"
ATTN_CSV = "attn.csv"
COMPARE_CSV = "compare.csv"
COMPARE_MEDIAN_CSV = "compare_median.csv"


class UsageError(SktuneError, ValueError):
    """Invalid combination of command-line options."""
    pass


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a training run needs, as collected from the command line.
    """
    model_path: Optional[Path]
    method: str
    task_kind: str
    prompt: Optional[str]
    n_virtual: int
    bottleneck: int
    adapter_layers: int
    data_path: Optional[Path]
    n_synthetic: Optional[int]
    hp: HyperParams
    out: Path

    def __post_init__(self):
        if self.method not in METHOD_KINDS:
            raise UsageError(f"Unknown method {self.method!r}.")
        if self.method in ("sk-prompt", "sk-prefix") and not self.prompt:
            raise UsageError(f"Method {self.method!r} needs a prompt text (--prompt).")
        if (self.data_path is None) == (self.n_synthetic is None):
            raise UsageError("Exactly one of --data and --synthetic should be given.")
        return


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    value = os.environ.get("SKTUNE_SEED")
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"SKTUNE_SEED should be an integer, but is {value!r}.") from None


def _load_model(path: Optional[Path]) -> FrozenModel:
    if path is None:
        logger.warning("No --model given; using the randomly initialized reference model.")
        return FrozenModel(ModelConfig())
    return FrozenModel.load(path)


def _load_data(
    config: RunConfig, vocab_size: int, seed: int, prompts: Sequence[str] = ()
) -> Tuple[Vocab, List[Example], List[Example]]:
    # Returns the vocabulary, the training split and the evaluation (test) split; a vocabulary
    # built from a JSONL file always covers the prompt texts
    if config.data_path is None:
        vocab = standard_vocab()
        examples = gen_synthetic(config.task_kind, config.n_synthetic, seed, vocab)
    else:
        texts = read_texts(config.data_path, config.task_kind)
        vocab = build_vocab(texts, vocab_size, include=[prompt for prompt in prompts if prompt])
        examples = load_jsonl(config.data_path, config.task_kind, vocab)
    if len(vocab) > vocab_size:
        raise UsageError(f"Vocabulary of size {len(vocab)} exceeds the model's {vocab_size}.")
    train_set, _, test_set = split(examples, param_data.SPLIT_FRACTIONS, seed)
    if not train_set:
        raise UsageError("The training split is empty; provide more examples.")
    return vocab, train_set, test_set or train_set


def _make_method(config: RunConfig, model: FrozenModel, vocab: Vocab, seed: int) -> PeftMethod:
    prompt_ids = vocab.encode(config.prompt) if config.prompt else None
    return create_method(
        config.method,
        model,
        config.task_kind,
        prompt_ids=prompt_ids,
        n_virtual=config.n_virtual,
        bottleneck=config.bottleneck,
        adapter_layers=config.adapter_layers,
        seed=seed,
    )


def _table_row(run: TrainRun) -> str:
    return (
        f"{run.method}\t{run.trainable_count}\t{run.trainable_pct:.5f}\t"
        f"{100 * run.metrics.accuracy:.2f}\t{100 * run.metrics.f1:.2f}"
    )


def run_config_from_args(
    args: argparse.Namespace, method: str, prompt: Optional[str] = None
) -> RunConfig:
    task_kind = resolve_task_kind(args.task)
    overrides = {
        "seed": _resolve_seed(args.seed),
        "batch_size": args.batch,
        "loss_threshold": args.threshold,
    }
    if args.lr is not None:
        overrides["lr"] = args.lr
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    n_synthetic = args.synthetic
    if args.data is None and n_synthetic is None:
        n_synthetic = DEFAULT_SYNTHETIC
    depth = args.adapter_layers
    return RunConfig(
        model_path=args.model,
        method=method,
        task_kind=task_kind,
        prompt=args.prompt if prompt is None else prompt,
        n_virtual=args.n_virtual,
        bottleneck=args.bottleneck,
        adapter_layers=depth[0] if isinstance(depth, list) else depth,
        data_path=args.data,
        n_synthetic=n_synthetic,
        hp=HyperParams.for_task(task_kind, **overrides),
        out=args.out,
    )


def cmd_pretrain(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    config = ModelConfig(
        vocab_size=args.vocab,
        d_model=args.d_model,
        n_layers=args.layers,
        n_heads=args.heads,
        d_ffn=args.d_ffn,
        max_seq=args.max_seq,
        seed=seed,
    )
    corpus = ngram_corpus(config.vocab_size, args.sequences, args.seq_len, seed)
    model = pretrain(config, corpus, steps=args.steps, lr=args.lr, batch_size=args.batch)
    _, heldout = split_corpus(corpus)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    model.save(args.out)
    print(f"held-out LM loss: {heldout_loss(model, heldout):.6f}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = run_config_from_args(args, args.method)
    model = _load_model(config.model_path)
    vocab, train_set, test_set = _load_data(
        config, model.config.vocab_size, config.hp.seed, [config.prompt]
    )
    method = _make_method(config, model, vocab, config.hp.seed)
    run = train(model, method, train_set, config.hp, eval_dataset=test_set)
    config.out.mkdir(parents=True, exist_ok=True)
    method.save(config.out / ADAPTER_JSON, vocab=vocab)
    metrics.emit_run_csv(run, config.out / RUN_CSV)
    print(_table_row(run))
    return EXIT_OK


def _compare_variants(args: argparse.Namespace) -> List[Tuple[str, str, Optional[str], int]]:
    # (method, variant, prompt, adapter layers) for every configuration to be trained
    prompts = [("best", args.prompt)] if args.prompt else [("none", None)]
    if args.prompt_ablation:
        prompts = list(param_data.prompt_texts[["name", "text"]].itertuples(index=False))
    variants = []
    for method in args.methods:
        if method in ("sk-prompt", "sk-prefix"):
            depths = args.adapter_layers if method == "sk-prompt" else [param_data.ADAPTER_LAYERS]
            for prompt_name, prompt in prompts:
                for depth in depths:
                    variant = prompt_name if len(depths) == 1 else f"{prompt_name}/k{depth}"
                    variants.append((method, variant, prompt, depth))
        else:
            variants.append((method, "-", None, param_data.ADAPTER_LAYERS))
    return variants


def cmd_compare(args: argparse.Namespace) -> int:
    if args.seeds < 1:
        raise UsageError(f"--seeds should be at least 1, but is {args.seeds}.")
    fallback = param_data.BEST_PROMPT if args.prompt_ablation else None
    base = run_config_from_args(args, args.methods[0], args.prompt or fallback)
    # Every variant is validated before the first run starts
    configs = [
        (replace(base, method=method_kind, prompt=prompt, adapter_layers=depth), variant)
        for method_kind, variant, prompt, depth in _compare_variants(args)
    ]
    model = _load_model(base.model_path)
    data_seed = base.hp.seed
    vocab, train_set, test_set = _load_data(
        base, model.config.vocab_size, data_seed, [config.prompt for config, _ in configs]
    )
    rows = []
    for config, variant in configs:
        for seed in range(data_seed, data_seed + args.seeds):
            method = _make_method(config, model, vocab, seed)
            run = train(model, method, train_set, replace(config.hp, seed=seed), test_set)
            rows.append(
                {
                    "method": run.method,
                    "variant": variant,
                    "seed": seed,
                    "convergence_step": run.convergence_step,
                    "accuracy": run.metrics.accuracy,
                    "f1": run.metrics.f1,
                    "params_pct": run.trainable_pct,
                }
            )
            logger.info(f"{run.method} [{variant}] seed {seed}: {_table_row(run)}")
    table = pd.DataFrame(rows, columns=[
        "method", "variant", "seed", "convergence_step", "accuracy", "f1", "params_pct"
    ])
    table["convergence_step"] = table["convergence_step"].astype(float)
    medians = (
        table.drop(columns="seed")
        .groupby(["method", "variant"], sort=False)
        .median()
        .reset_index()
    )
    base.out.mkdir(parents=True, exist_ok=True)
    table.to_csv(base.out / COMPARE_CSV, index=False, float_format="%.17g", lineterminator="\n")
    medians.to_csv(
        base.out / COMPARE_MEDIAN_CSV, index=False, float_format="%.17g", lineterminator="\n"
    )
    print(medians.to_string(index=False))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    errors: Dict[str, float] = gradcheck.primitive_checks(args.eps, seed)
    model = FrozenModel(ModelConfig(**param_data.GRADCHECK_MODEL, seed=seed))
    vocab = standard_vocab()
    prompt_ids = vocab.encode(param_data.BEST_PROMPT)
    batch = collate(gen_synthetic("sequence", 2, seed, vocab))
    rng = np.random.default_rng(seed)
    for kind in ("sk-prompt", "sk-prefix"):
        method = create_method(kind, model, "sequence", prompt_ids=prompt_ids, seed=seed)
        # Move off the zero initializations so that every trainable tensor receives a gradient
        for tensor in method.trainable.values():
            tensor.data = tensor.data + rng.normal(0, 0.1, tensor.shape)
        for name, error in gradcheck.method_checks(method, batch, args.eps).items():
            errors[f"{kind}/{name}"] = error
    failed = [op for op, error in errors.items() if not error < GRADCHECK_TOLERANCE]
    for op, error in errors.items():
        logger.info(f"gradcheck {op}: {error:.3e}")
        print(f"{op}\t{error:.3e}\t{'FAIL' if op in failed else 'ok'}")
    if failed:
        print(f"gradient check failed for: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFICATION
    return EXIT_OK


def _saved_vocab(metadata: dict, path: Path) -> Optional[Vocab]:
    # Vocabulary stored next to an adapter by `train`, if any
    tokens = metadata.get("vocab")
    if tokens is None:
        return None
    reserved = len(param_data.RESERVED_TOKENS)
    if not isinstance(tokens, list) or tuple(tokens[:reserved]) != param_data.RESERVED_TOKENS:
        raise CheckpointFormatError(f"{path} has a malformed vocabulary.")
    try:
        return Vocab(tokens[reserved:])
    except (ValueError, TypeError) as e:
        raise CheckpointFormatError(f"{path} has a malformed vocabulary ({e}).") from None


def _attention_method(args: argparse.Namespace, model: FrozenModel) -> Tuple[SKPrompt, Vocab]:
    if args.adapter is None:
        vocab = standard_vocab()
        seed = _resolve_seed(args.seed)
        return SKPrompt(model, vocab.encode(args.prompt), "sequence", seed=seed), vocab
    _, metadata = checkpoint.load(args.adapter)
    options = metadata.get("method", {})
    if options.get("kind") != SKPrompt.kind:
        raise CheckpointFormatError(f"{args.adapter} is not an {SKPrompt.kind!r} checkpoint.")
    vocab = _saved_vocab(metadata, args.adapter)
    if vocab is None:
        vocab = standard_vocab()
    method = SKPrompt(
        model,
        options["prompt_ids"],
        options["task_kind"],
        options["n_classes"],
        options["seed"],
        options["bottleneck"],
        options["adapter_layers"],
    )
    method.load(args.adapter)
    return method, vocab


def cmd_attn(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    method, vocab = _attention_method(args, model)
    input_ids = vocab.encode(args.input)
    attn = method.attention_maps(input_ids)
    tokens = vocab.decode(method.prompt_ids) + vocab.decode(input_ids)
    args.out.mkdir(parents=True, exist_ok=True)
    metrics.emit_attention_csv(attn, args.layer, args.head, tokens, tokens, args.out / ATTN_CSV)
    return EXIT_OK


def cmd_params(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    vocab = standard_vocab()
    prompt = args.prompt or param_data.BEST_PROMPT
    method = create_method(
        args.method,
        model,
        resolve_task_kind(args.task),
        prompt_ids=vocab.encode(prompt),
        n_virtual=args.n_virtual,
        bottleneck=args.bottleneck,
        adapter_layers=args.adapter_layers,
    )
    count = method.trainable_params()
    print(f"{method.name}\t{count.count}\t{count.percentage:.3f}%")
    for name, size in count.breakdown.items():
        print(f"  {name}\t{size}")
    for key, value in efficiency_report(method).items():
        if key != "method":
            print(f"  {key}\t{value}")
    return EXIT_OK


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", type=Path, help="Frozen-model checkpoint (SKT1).")
    parser.add_argument("--task", default="seqcls", help="seqcls, tokcls or nli.")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--data", type=Path, help="JSONL dataset.")
    source.add_argument("--synthetic", type=int, help="Number of synthetic examples.")
    parser.add_argument("--prompt", help="Prompt (or prefix) text of the semantic methods.")
    parser.add_argument("--n-virtual", type=int, default=param_data.N_VIRTUAL)
    parser.add_argument("--bottleneck", type=int, default=param_data.ADAPTER_BOTTLENECK)
    parser.add_argument("--lr", type=float, help="Learning rate (default: per task).")
    parser.add_argument("--epochs", type=int, help="Number of epochs (default: per task).")
    parser.add_argument("--batch", type=int, default=param_data.BATCH_SIZE)
    parser.add_argument("--seed", type=int, help="Seed (default: $SKTUNE_SEED, else 0).")
    parser.add_argument("--threshold", type=float, default=param_data.LOSS_THRESHOLD)
    parser.add_argument("--out", type=Path, required=True, help="Output directory.")
    return


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sktune", description="Semantic-knowledge tuning of a frozen transformer."
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="Pretrain and save a frozen model.")
    p.add_argument("--out", type=Path, required=True, help="Checkpoint path.")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, default=param_data.PRETRAIN_STEPS)
    p.add_argument("--lr", type=float, default=param_data.PRETRAIN_LR)
    p.add_argument("--batch", type=int, default=param_data.BATCH_SIZE)
    p.add_argument("--sequences", type=int, default=param_data.PRETRAIN_SEQUENCES)
    p.add_argument("--seq-len", type=int, default=param_data.PRETRAIN_SEQ_LEN)
    for flag, key in (
        ("--vocab", "vocab_size"),
        ("--d-model", "d_model"),
        ("--layers", "n_layers"),
        ("--heads", "n_heads"),
        ("--d-ffn", "d_ffn"),
        ("--max-seq", "max_seq"),
    ):
        p.add_argument(flag, type=int, default=param_data.REFERENCE_MODEL[key])
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="Train one method.")
    p.add_argument("--method", choices=METHOD_KINDS, required=True)
    p.add_argument("--adapter-layers", type=int, default=param_data.ADAPTER_LAYERS)
    _add_data_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="Train several methods over several seeds.")
    p.add_argument("--methods", nargs="+", choices=METHOD_KINDS, required=True)
    p.add_argument("--seeds", type=int, default=3, help="Number of seeds per method.")
    p.add_argument("--adapter-layers", type=int, nargs="+", default=[param_data.ADAPTER_LAYERS])
    p.add_argument("--prompt-ablation", action="store_true",
                   help="Train the semantic methods with each bundled prompt text.")
    _add_data_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="Verify gradients by finite differences.")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("attn", help="Export a semantic-prompt attention map.")
    p.add_argument("--model", type=Path)
    p.add_argument("--adapter", type=Path, help="Trained sk-prompt checkpoint.")
    p.add_argument("--prompt", default=param_data.BEST_PROMPT)
    p.add_argument("--input", default=param_data.FIG_INPUT)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--head", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True, help="Output directory.")
    p.set_defaults(func=cmd_attn)

    p = sub.add_parser("params", help="Print trainable-parameter accounting.")
    p.add_argument("--model", type=Path)
    p.add_argument("--method", choices=METHOD_KINDS, required=True)
    p.add_argument("--task", default="seqcls")
    p.add_argument("--prompt", help="Prompt text (default: the best bundled prompt).")
    p.add_argument("--n-virtual", type=int, default=param_data.N_VIRTUAL)
    p.add_argument("--bottleneck", type=int, default=param_data.ADAPTER_BOTTLENECK)
    p.add_argument("--adapter-layers", type=int, default=param_data.ADAPTER_LAYERS)
    p.set_defaults(func=cmd_params)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NonFiniteError as e:
        print(f"sktune: numeric abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, CheckpointFormatError) as e:
        print(f"sktune: {e}", file=sys.stderr)
        return EXIT_IO
    except (SktuneError, ValueError, TypeError, KeyError) as e:
        print(f"sktune: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
