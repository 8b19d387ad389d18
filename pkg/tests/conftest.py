from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import corpus  # noqa: E402

from mdrdh import jpeg_codec as jc  # noqa: E402


@pytest.fixture(scope="session")
def corpus_files(tmp_path_factory) -> dict[int, list[Path]]:
    return corpus.build_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def qf50(corpus_files) -> list[Path]:
    return corpus_files[50]


@pytest.fixture(scope="session")
def camera_bytes() -> bytes:
    import skimage.data

    return corpus.encode(skimage.data.camera()[:384, :512], 50)


@pytest.fixture(scope="session")
def portrait_bytes() -> bytes:
    return corpus.encode(corpus.portrait(), 50)


@pytest.fixture(scope="session")
def texture_bytes() -> bytes:
    return corpus.encode(corpus.texture(), 50)


@pytest.fixture(scope="session")
def camera(camera_bytes):
    jpeg = jc.parse(camera_bytes)
    image, tokens = jc.entropy_decode(jpeg)
    return jpeg, image, tokens


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
