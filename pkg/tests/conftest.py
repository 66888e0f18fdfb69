import numpy as np
import pytest

from rpcaseg import imgio


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_png(tmp_path):
    """Write a [0,1] grayscale array as PNG and return its path."""

    def _write(arr, name="img.png"):
        path = tmp_path / name
        imgio.save_image(np.asarray(arr, dtype=np.float64), str(path))
        return str(path)

    return _write


@pytest.fixture
def write_mask_png(tmp_path):
    def _write(mask, name="mask.png"):
        path = tmp_path / name
        imgio.save_mask(np.asarray(mask, dtype=bool), str(path))
        return str(path)

    return _write


@pytest.fixture
def write_manifest(tmp_path):
    """Write a manifest JSON document and return its path."""
    import json

    def _write(doc, name="manifest.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return _write
