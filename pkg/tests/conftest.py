import numpy as np
import pytest

from lmenrich.data_io import generate_scene, load_scheme
from lmenrich.patches import NO_AUGMENT
from lmenrich.regressor import OffsetRegressor


@pytest.fixture(scope="session")
def scheme68():
    return load_scheme("300w-68")


@pytest.fixture(scope="session")
def scheme98():
    return load_scheme("wflw-98")


@pytest.fixture(scope="session")
def scene():
    return generate_scene(11)


@pytest.fixture(scope="session")
def tiny_model():
    """Cheap model for plumbing tests; quality is irrelevant here."""
    scenes = [generate_scene(500 + i) for i in range(4)]
    model = OffsetRegressor(epochs=1, augment=NO_AUGMENT, seed=3)
    return model.fit([s.image for s in scenes], [s.anchors for s in scenes])


def wflw_like_anchors(rng=None):
    """98 plausible anchors: each component traced on a small loop or arc."""
    rng = np.random.default_rng(0) if rng is None else rng
    scheme = load_scheme("wflw-98")
    pts = np.zeros((98, 2))
    for k, comp in enumerate(scheme.components):
        n = comp.n_anchors
        cx, cy = 100 + 40 * (k % 4), 100 + 40 * (k // 4)
        if comp.isolated:
            pts[comp.start] = (cx, cy)
            continue
        a = np.linspace(0, 2 * np.pi, n, endpoint=False) if comp.closed else np.linspace(0, np.pi, n)
        pts[comp.start:comp.stop + 1] = np.c_[cx + 15 * np.cos(a), cy + 10 * np.sin(a)]
    return pts + rng.normal(0, 0.1, pts.shape)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
