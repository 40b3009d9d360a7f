import numpy as np
import pytest

from qrouter.media import FrameSequence, save_frame_dir


def ramp_frame(h=48, w=48):
    """Smooth two-axis color ramp; no edges, near-constant gradients."""
    yy, xx = np.mgrid[0:h, 0:w]
    return np.stack([64 + xx * 2, 64 + yy * 2, np.full_like(xx, 128)], -1).astype(np.uint8)


def burst_video(n=64, burst=(28, 37), amplitude=40.0, seed=3, h=48, w=48):
    """Static ramp video with a full-frame Gaussian noise burst on frames ``burst`` (1-based, inclusive)."""
    rng = np.random.default_rng(seed)
    base = ramp_frame(h, w)
    frames = [base.copy() for _ in range(n)]
    for t in range(burst[0], burst[1] + 1):
        noisy = base + amplitude * rng.standard_normal(base.shape)
        frames[t - 1] = np.clip(noisy, 0, 255).astype(np.uint8)
    return frames


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def static_dir(tmp_path):
    """16 identical frames on disk."""
    return save_frame_dir(tmp_path / "static", [ramp_frame(32, 32)] * 16)


@pytest.fixture
def burst_dir(tmp_path):
    return save_frame_dir(tmp_path / "burst", burst_video())


@pytest.fixture
def textured_dir(tmp_path):
    """16 frames of random texture, each slightly different."""
    rng = np.random.default_rng(7)
    base = rng.integers(0, 256, (32, 32, 3))
    frames = [np.clip(base + rng.integers(-8, 9, base.shape), 0, 255).astype(np.uint8) for _ in range(16)]
    return save_frame_dir(tmp_path / "textured", frames)


def seq_of(frames):
    return FrameSequence([np.asarray(f, dtype=np.uint8) for f in frames])


# acceptance criteria outcomes, printed once at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}")
