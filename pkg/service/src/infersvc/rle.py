"""Row-major run-length encoding for binary masks.

Runs alternate false/true starting with the false run, so the first integer
may be 0. Every encoding sums to exactly width * height.
"""

import numpy as np


def encode_mask(bits: np.ndarray) -> list[int]:
    flat = np.asarray(bits, dtype=bool).ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def decode_mask(runs: list[int], width: int, height: int) -> np.ndarray:
    total = width * height
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if run < 0:
            raise ValueError(f"negative run {run}")
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    if pos != total:
        raise ValueError(f"runs decode to {pos} pixels, expected {total}")
    return flat.reshape(height, width)
