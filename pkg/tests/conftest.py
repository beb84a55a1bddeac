import json
from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def imagenet_fixture():
    return json.load(open(DATA_DIR / "imagenet_models.json"))


@pytest.fixture(scope="session")
def cityscapes_fixture():
    return json.load(open(DATA_DIR / "cityscapes_models.json"))


@pytest.fixture(scope="session")
def ade20k_fixture():
    return json.load(open(DATA_DIR / "ade20k_models.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_disk_image(size=64, radius=20, channels=3):
    """White disk on black with a sinusoidal texture inside the disk."""
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    disk = ((xx - c) ** 2 + (yy - c) ** 2 <= radius ** 2).astype(np.float64)
    tex = disk * (0.75 + 0.25 * np.sin(xx * 1.3) * np.sin(yy * 1.1))
    return np.repeat(tex[:, :, None], channels, axis=2)
