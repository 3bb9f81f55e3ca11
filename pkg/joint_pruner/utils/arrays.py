from typing import Any

import numpy as np


def encode_array(array: np.ndarray) -> dict[str, Any]:
    """Shape plus row-major float64 data; Python's float repr keeps every bit."""
    return {"shape": list(array.shape), "data": np.asarray(array, dtype=np.float64).ravel().tolist()}


def decode_array(document: dict[str, Any]) -> np.ndarray:
    return np.array(document["data"], dtype=np.float64).reshape(document["shape"])


def encode_arrays(arrays: dict[str, np.ndarray]) -> dict[str, Any]:
    return {name: encode_array(value) for name, value in arrays.items()}


def decode_arrays(document: dict[str, Any]) -> dict[str, np.ndarray]:
    return {name: decode_array(value) for name, value in document.items()}
