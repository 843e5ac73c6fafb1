"""
Test functions for the SKT1 checkpoint format in `sktune.checkpoint`.
"""

# 3rd-party packages
import numpy as np
import pytest

# Self
from sktune import checkpoint
from sktune.tensor import Tensor
from sktune.exceptions import CheckpointFormatError, NonFiniteError


# Set up random number generator with seed to make sure testing results are consistent
random_gen = np.random.RandomState(1111)


def test_roundtrip_bytes(tmp_path):
    """
    Test function for `sktune.checkpoint.save` and `sktune.checkpoint.load`: loading and
    re-saving reproduces the file byte for byte.
    """
    params = {
        "b": Tensor(random_gen.normal(size=(3, 2))),
        "a": random_gen.normal(size=4) * 1e-300,
        "c": np.array([-0.0, 0.0, 1e300, 5.0]),
    }
    path = tmp_path / "ckpt.json"
    checkpoint.save(path, params, config={"d_model": 8, "ln_eps": 1e-5}, note="x")
    loaded, metadata = checkpoint.load(path)
    assert metadata == {"config": {"d_model": 8, "ln_eps": 1e-5}, "note": "x"}
    assert isinstance(metadata["config"]["d_model"], int)
    assert np.array_equal(loaded["b"], params["b"].data)
    assert np.array_equal(loaded["a"], params["a"])
    assert np.signbit(loaded["c"][0]) and not np.signbit(loaded["c"][1])
    path2 = tmp_path / "ckpt2.json"
    checkpoint.save(path2, loaded, **metadata)
    assert path.read_bytes() == path2.read_bytes()
    return


def test_layout():
    """
    Test function for the layout of `sktune.checkpoint.dumps`.
    """
    text = checkpoint.dumps({"w": np.array([[1.0, 0.5]])}, method={"kind": "full"})
    assert text == (
        '{"format":"SKT1","method":{"kind": "full"},"params":{\n'
        '"w":{"shape":[1,2],"data":[1,0.5]}\n'
        "}}\n"
    )
    return


def test_errors():
    """
    Test function for the errors of `sktune.checkpoint`.
    """
    with pytest.raises(NonFiniteError):
        checkpoint.dumps({"w": np.array([1.0, np.nan])})
    with pytest.raises(CheckpointFormatError):
        checkpoint.loads('{"format":"SKT0","params":{}}')
    with pytest.raises(CheckpointFormatError):
        checkpoint.loads("not json")
    with pytest.raises(CheckpointFormatError):
        checkpoint.loads('{"format":"SKT1","params":{"w":{"shape":[3],"data":[1,2]}}}')
    return


def test_metadata_types():
    """
    Test that metadata values keep their JSON types when read back: whole-number floats stay
    floats, integers stay integers, and a "-0" in parameter data keeps its sign.
    """
    text = checkpoint.dumps(
        {"w": np.array([-0.0, 2.0])},
        method={"scale": 1.0, "bottleneck": 4, "prompt_ids": [3, 0]},
    )
    params, metadata = checkpoint.loads(text)
    assert isinstance(metadata["method"]["scale"], float)
    assert isinstance(metadata["method"]["bottleneck"], int)
    assert all(isinstance(i, int) for i in metadata["method"]["prompt_ids"])
    assert np.signbit(params["w"][0])
    assert params["w"].dtype == np.float64
    assert checkpoint.dumps(params, **metadata) == text
    return
