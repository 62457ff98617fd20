from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from trackfuse.model import FrameBuffer

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def scenario_paths() -> list[Path]:
    paths = sorted((DATA_DIR / "scenarios").glob("recovery_*.json"))
    assert paths, "pinned scenario files are missing"
    return paths


def random_frame(rng: np.random.Generator, height: int, width: int) -> FrameBuffer:
    return FrameBuffer.from_array(rng.integers(0, 256, size=(height, width), dtype=np.uint8))
