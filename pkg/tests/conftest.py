import numpy as np
import pytest

from zsar import Split, SyntheticWorldSpec, generate_synthetic
from zsar.gaussians import standard_normal


def planted_world(seed, n_seen=20, n_unseen=5, dim_d=16, dim_k=8, n_train=500,
                  n_test=100, noise=1.0, w_scale=1.0):
    """Linear world with per-role example counts: seen classes carry the
    training pool, unseen classes carry the test pool."""
    n_classes = n_seen + n_unseen
    rng = np.random.Generator(np.random.PCG64(seed + 900000))
    w_true = standard_normal(rng, (dim_d, dim_k)) * w_scale
    counts = [n_train] * n_seen + [n_test] * n_unseen
    spec = SyntheticWorldSpec(n_classes, dim_d, dim_k, w_true, noise, counts,
                              "random_unit", seed)
    dataset, truths = generate_synthetic(spec)
    split = Split(tuple(range(n_seen)), tuple(range(n_seen, n_classes)), seed=seed)
    return dataset, truths, split


@pytest.fixture(scope="session")
def world7():
    return planted_world(7)


@pytest.fixture(scope="session")
def world11():
    return planted_world(11)
