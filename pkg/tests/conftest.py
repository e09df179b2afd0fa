# SPDX-License-Identifier: MIT

import numpy as np
import pytest

import hyperbench.dataset


@pytest.fixture(scope='session')
def small_dataset():
    cfg = hyperbench.dataset.SyntheticConfig(
        seed=7,
        classes=(('grass', 60), ('roof', 48), ('water', 40)),
        noise_sigma=0.01,
    )
    return hyperbench.dataset.generate_synthetic(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
