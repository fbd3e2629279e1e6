import numpy as np
import pytest

from anoscore.types import ImageTensor


def random_image(rng: np.random.Generator, image_id: str = "img",
                 shape=(8, 8, 3), lo: float = 0.3, hi: float = 0.7) -> ImageTensor:
    """Random test image kept away from the clipping boundary."""
    return ImageTensor(id=image_id, pixels=rng.uniform(lo, hi, shape))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
