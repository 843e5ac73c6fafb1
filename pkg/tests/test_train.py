"""
Test functions for training and evaluation in `sktune.train`.
"""

# 3rd-party packages
import numpy as np
import pytest

# Self
from sktune import train, peft
from sktune import reference_ops as ref
from sktune.data import param_data, standard_vocab, gen_synthetic, split
from sktune.model import ModelConfig, FrozenModel
from sktune.exceptions import EmptyInputError, NonFiniteError


CONFIG = ModelConfig(vocab_size=64, d_model=8, n_layers=1, n_heads=2, d_ffn=16, max_seq=32, seed=2)


@pytest.fixture(scope="module")
def model():
    return FrozenModel(CONFIG)


@pytest.fixture(scope="module")
def dataset():
    return gen_synthetic("sequence", 40, 0, standard_vocab())


def prompt_ids():
    return standard_vocab().encode("classify the sentiment of text:")


def test_convergence_step():
    """
    Test function for `sktune.train.convergence_step`, compared against a linear scan.
    """
    losses = [0.9, 0.5, 0.2, 0.19, 0.3, 0.1]
    assert train.convergence_step(losses, 0.2) == 3 == ref.linear_scan_first_below(losses, 0.2)
    assert train.convergence_step(losses, 0.05) is None
    assert train.convergence_step([], 0.2) is None
    with pytest.raises(ValueError):
        train.convergence_step(losses, 0)
    return


def test_hyperparams():
    hp = train.HyperParams.for_task("token", batch_size=4)
    assert (hp.lr, hp.epochs, hp.batch_size) == (1e-3, 10, 4)
    assert train.HyperParams(lr=0, epochs=1).lr == 0
    with pytest.raises(ValueError):
        train.HyperParams(lr=-1e-3, epochs=1)
    with pytest.raises(ValueError):
        train.HyperParams(lr=1e-3, epochs=1, batch_size=0)
    with pytest.raises(ValueError):
        train.HyperParams(lr=float("nan"), epochs=1)
    return


def test_zero_epochs(model, dataset):
    method = peft.create_method("sk-prompt", model, "sequence", prompt_ids=prompt_ids())
    before = method.state_dict()
    run = train.train(model, method, dataset, train.HyperParams(lr=1e-2, epochs=0))
    assert run.losses == [] and run.steps == 0 and run.final_loss is None
    assert run.convergence_step is None
    assert run.metrics.n == len(dataset)
    assert all(np.array_equal(v, method.state_dict()[k]) for k, v in before.items())
    return


def test_deterministic(model, dataset):
    """
    Test function for `sktune.train.train`: identical inputs give identical runs, and the frozen
    model stays bitwise unchanged.
    """
    before = model.dumps()
    hp = train.HyperParams(lr=1e-2, epochs=2, batch_size=8, seed=4)
    runs = [
        train.train(
            model, peft.create_method("sk-prefix", model, "sequence", prompt_ids=prompt_ids()),
            dataset, hp,
        )
        for _ in range(2)
    ]
    assert runs[0].steps == 10
    assert runs[0].to_dict() == runs[1].to_dict()
    assert runs[0].to_json() == runs[1].to_json()
    assert model.dumps() == before
    other = train.train(
        model, peft.create_method("sk-prefix", model, "sequence", prompt_ids=prompt_ids()),
        dataset, train.HyperParams(lr=1e-2, epochs=2, batch_size=8, seed=5),
    )
    assert other.losses != runs[0].losses
    return


def test_zero_learning_rate(model, dataset):
    """
    Test function for `sktune.train.train` with a learning rate of 0: parameters never move, so
    the loss on the full dataset stays constant.
    """
    method = peft.create_method("lora2", model, "sequence")
    run = train.train(
        model, method, dataset, train.HyperParams(lr=0, epochs=4, batch_size=len(dataset))
    )
    assert run.steps == 4
    assert np.allclose(run.losses, run.losses[0], rtol=0, atol=1e-12)
    return


def test_learning():
    """
    Test function for `sktune.train.train`: on the synthetic sentiment task, semantic prompt
    tuning lowers the training loss.
    """
    model = FrozenModel(ModelConfig())
    data = gen_synthetic("sequence", 200, 0, standard_vocab())
    method = peft.create_method("sk-prompt", model, "sequence", prompt_ids=prompt_ids())
    run = train.train(model, method, data, train.HyperParams(lr=1e-2, epochs=5, log_every=0))
    assert run.steps == 65
    assert np.mean(run.losses[-10:]) < np.mean(run.losses[:10])
    return


def test_non_finite(model, dataset):
    method = peft.create_method("prompt", model, "sequence", n_virtual=2)
    method.head["W"].data = np.full((8, 2), np.nan)
    with pytest.raises(NonFiniteError) as e:
        train.train(model, method, dataset, train.HyperParams(lr=1e-2, epochs=1))
    assert e.value.step == 0
    return


def test_errors(model, dataset):
    method = peft.create_method("prompt", model, "sequence", n_virtual=2)
    with pytest.raises(EmptyInputError):
        train.train(model, method, [], train.HyperParams(lr=1e-2, epochs=1))
    with pytest.raises(ValueError):
        train.train(FrozenModel(CONFIG), method, dataset, train.HyperParams(lr=1e-2, epochs=1))
    with pytest.raises(EmptyInputError):
        train.evaluate(model, method, [])
    return


def test_evaluate(model, dataset):
    """
    Test function for `sktune.train.evaluate`: it is repeatable and changes no parameter.
    """
    method = peft.create_method("ptuning", model, "sequence", n_virtual=2)
    before = method.state_dict()
    first = train.evaluate(model, method, dataset)
    assert first == train.evaluate(model, method, dataset, batch_size=7)
    assert first.n == len(dataset)
    assert all(np.array_equal(v, method.state_dict()[k]) for k, v in before.items())
    assert all(p.grad is None for p in method.trainable.values())
    return


def test_efficiency_report(model, dataset):
    method = peft.create_method("lora4", model, "sequence")
    count = method.trainable_params().count
    report = train.efficiency_report(method)
    assert report["trainable_bytes"] == 8 * count
    assert report["total_bytes"] == 8 * model.num_params + 4 * 8 * count
    assert "seconds_per_step" not in report
    run = train.train(model, method, dataset, train.HyperParams(lr=1e-3, epochs=1))
    assert train.efficiency_report(method, run)["seconds_per_step"] > 0
    return


def best_prompt_ids():
    return standard_vocab().encode(param_data.BEST_PROMPT)


@pytest.fixture(scope="module")
def sentiment_2000():
    return gen_synthetic("sequence", 2000, 0, standard_vocab())


@pytest.fixture(scope="module")
def task_splits():
    vocab = standard_vocab()
    return {
        task_kind: split(gen_synthetic(task_kind, 2000, 0, vocab), seed=0)
        for task_kind in param_data.TASK_KINDS
    }


@pytest.mark.parametrize("kind", [kind for kind in peft.METHOD_KINDS if kind != "full"])
def test_frozen_model_after_200_steps(kind):
    """
    Test function for `sktune.train.train`: 200 steps of every parameter-efficient method on
    the synthetic sentiment task leave the serialized frozen model byte-identical, and only the
    method's declared tensors are optimized.
    """
    model = FrozenModel(ModelConfig())
    data = gen_synthetic("sequence", 40, 1, standard_vocab())
    before = model.dumps()
    method = peft.create_method(kind, model, "sequence", prompt_ids=best_prompt_ids(), seed=1)
    declared = method.trainable_params().breakdown
    run = train.train(
        model, method, data, train.HyperParams(lr=1e-2, epochs=40, batch_size=8, log_every=0)
    )
    assert run.steps == 200
    assert model.dumps() == before
    assert all(p.grad is None for p in model.params.values())
    assert {name: p.size for name, p in method.trainable.items()} == declared
    return


def test_untrained_accuracy(pretrained_model):
    """
    Test function for `sktune.train.evaluate`: an untrained method is no better than chance on
    the balanced sentiment task.
    """
    data = gen_synthetic("sequence", 200, 3, standard_vocab())
    method = peft.create_method(
        "sk-prompt", pretrained_model, "sequence", prompt_ids=best_prompt_ids()
    )
    accuracy = train.evaluate(pretrained_model, method, data).accuracy
    assert 0.3 <= accuracy <= 0.7
    return


def test_memorize_ten_examples(pretrained_model):
    """
    Test function for `sktune.train.train`: semantic prompt tuning fits ten training examples
    exactly.
    """
    data = gen_synthetic("sequence", 10, 4, standard_vocab())
    method = peft.create_method(
        "sk-prompt", pretrained_model, "sequence", prompt_ids=best_prompt_ids()
    )
    hp = train.HyperParams(lr=1e-2, epochs=200, batch_size=10, log_every=0)
    run = train.train(pretrained_model, method, data, hp)
    assert run.steps == 200
    assert run.metrics.accuracy == 1.0
    return


def test_sk_prompt_final_loss(pretrained_model, sentiment_2000):
    """
    Test function for `sktune.train.train` with the default protocol of the sentiment task
    (learning rate 1e-3, 3 epochs) on 2000 examples: the final training loss of semantic prompt
    tuning falls below 0.2.
    """
    hp = train.HyperParams.for_task("sequence", log_every=0)
    assert (hp.lr, hp.epochs) == (1e-3, 3)
    method = peft.create_method(
        "sk-prompt", pretrained_model, "sequence", prompt_ids=best_prompt_ids()
    )
    run = train.train(pretrained_model, method, sentiment_2000, hp)
    assert run.steps == 3 * 125
    assert run.final_loss < 0.2
    return


def test_convergence_median(pretrained_model, sentiment_2000):
    """
    Test function for the convergence of semantic prompt tuning on the sentiment task: over five
    seeds, its median convergence step is at most those of prompt tuning and prefix tuning with
    virtual tokens. A run that never converges counts as infinitely slow.
    """
    medians = {}
    for kind in ("sk-prompt", "prompt", "prefix"):
        steps = []
        for seed in range(5):
            method = peft.create_method(
                kind, pretrained_model, "sequence", prompt_ids=best_prompt_ids(), seed=seed
            )
            hp = train.HyperParams.for_task("sequence", seed=seed, log_every=0)
            run = train.train(pretrained_model, method, sentiment_2000, hp)
            steps.append(np.inf if run.convergence_step is None else run.convergence_step)
        medians[kind] = np.median(steps)
    assert np.isfinite(medians["sk-prompt"])
    assert medians["sk-prompt"] <= medians["prompt"]
    assert medians["sk-prompt"] <= medians["prefix"]
    return


@pytest.mark.parametrize("task_kind", param_data.TASK_KINDS)
@pytest.mark.parametrize("kind", peft.METHOD_KINDS)
def test_learnability_floor(kind, task_kind, pretrained_model, task_splits):
    """
    Test function for `sktune.train.train` with the default protocol of each task: every method
    reaches an accuracy of at least 0.95 on the held-out split of every synthetic task.
    """
    train_set, _, test_set = task_splits[task_kind]
    method = peft.create_method(
        kind, pretrained_model, task_kind, prompt_ids=best_prompt_ids(), seed=0
    )
    hp = train.HyperParams.for_task(task_kind, log_every=0)
    run = train.train(pretrained_model, method, train_set, hp, eval_dataset=test_set)
    assert run.metrics.accuracy >= 0.95
    return
