import numpy as np
import pytest

from leakseg.core import BinaryMask


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def mask_from(rows):
    """Build a BinaryMask from an iterable of 0/1 rows."""
    return BinaryMask(np.asarray(rows, dtype=bool))
