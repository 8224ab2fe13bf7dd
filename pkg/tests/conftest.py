import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catci import core

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile(
    "stress",
    deadline=None,
    max_examples=400,
    derandomize=False,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "suite"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_dataset(rng, n_rows, levels, names=None):
    """Random dataset with explicit labels (so unused codes are legal)."""
    names = names or [f"V{j + 1}" for j in range(len(levels))]
    columns = tuple(
        core.CategoricalColumn(
            name=name,
            levels=d,
            codes=rng.integers(0, d, size=n_rows),
            labels=tuple(str(i) for i in range(d)),
        )
        for name, d in zip(names, levels)
    )
    return core.Dataset(n_rows=n_rows, columns=columns)


@pytest.fixture
def small_dataset(rng):
    return make_dataset(rng, 200, (3, 4, 2))


def permute_column_levels(data, index, perm):
    """Relabel the levels of one column by ``perm`` (new_code = perm[old_code])."""
    perm = np.asarray(perm)
    cols = list(data.columns)
    col = cols[index]
    labels = col.labels
    if labels is not None:
        labels = tuple(labels[int(np.flatnonzero(perm == i)[0])] for i in range(col.levels))
    cols[index] = core.CategoricalColumn(col.name, col.levels, perm[col.codes], labels=labels)
    return core.Dataset(n_rows=data.n_rows, columns=tuple(cols))
