from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from elaforensics.imaging import ImageBuffer, to_jpeg_domain
from elaforensics.scenes import render_scene, write_corpus

FIXTURE_SEED = 123


def scene_fixtures(n: int = 10, size: int = 256) -> list[tuple[ImageBuffer, int]]:
    """``n`` photo-like scenes in the JPEG domain, alternately at quality 90 and 95."""
    rng = np.random.default_rng(FIXTURE_SEED)
    out = []
    for i in range(n):
        img, _ = render_scene(rng, size, size, n_objects=i % 3)
        q = 90 if i % 2 == 0 else 95
        out.append((to_jpeg_domain(img, q), q))
    return out


@pytest.fixture(scope="session")
def fixture_images():
    return scene_fixtures()


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return write_corpus(root, n_sources=6, n_targets=6, size=96, seed=3)


@pytest.fixture
def png_file(tmp_path):
    def make(array, name="img.png", mode=None):
        path = tmp_path / name
        Image.fromarray(np.asarray(array, dtype=np.uint8), mode=mode).save(path, format="PNG")
        return path

    return make


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
