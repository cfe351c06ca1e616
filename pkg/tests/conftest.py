from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("pkg", max_examples=40, deadline=None)
settings.load_profile("pkg")

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# The 4x4 two-atom mixture used across the suite: one atom upper triangular,
# the other diagonal plus a (4,1) hook.
MIX_A = np.array(
    [[2.0, 0, 0, 0], [0, 1.0, -1.0, -1.0], [0, 0, -1.0, 0], [0, 0, 0, -2.0]]
)
MIX_B = np.array(
    [[1.0, 0, 0, 0], [0, 2.0, 0, 0], [0, 0, 3.0, 0], [5.0, 0, 0, 4.0]]
)

TRI_LABELS = [
    np.eye(3, dtype=int),
    np.array([[0, 1, 1], [0, 0, 1], [0, 0, 0]]),
]


def three_label_masks():
    l1 = np.eye(4, dtype=int)
    l2 = np.zeros((4, 4), dtype=int)
    l2[3, 0] = 1
    l3 = np.zeros((4, 4), dtype=int)
    l3[1, 2] = 1
    l3[1, 3] = 1
    return [l1, l2, l3]


def two_label_masks():
    l1 = np.eye(4, dtype=int)
    l2 = np.zeros((4, 4), dtype=int)
    l2[1, 2] = 1
    l2[1, 3] = 1
    l2[3, 0] = 1
    return [l1, l2]


@pytest.fixture
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def mixture_family():
    from lyapbounds import finite_iid

    return finite_iid([MIX_A, MIX_B], [0.5, 0.5], seed=20260810)


@pytest.fixture
def tri_shape_set():
    from lyapbounds import validate_shape_set

    return validate_shape_set(TRI_LABELS)


@pytest.fixture
def three_label_set():
    from lyapbounds import validate_shape_set

    return validate_shape_set(three_label_masks())


@pytest.fixture
def two_label_set():
    from lyapbounds import validate_shape_set

    return validate_shape_set(two_label_masks())
