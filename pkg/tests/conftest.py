import numpy as np
import pytest

from treemax import StepFunction, Tree


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


def random_step_function(rng, arity=2, depth=4) -> StepFunction:
    """Mixed-texture random step function: smooth bulk plus heavy spikes."""
    tree = Tree(arity, depth)
    n = tree.leaf_count
    values = rng.exponential(1.0, n)
    spikes = rng.random(n) < 0.1
    values[spikes] *= 25.0
    return StepFunction(tree, values)
