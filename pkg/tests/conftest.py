import numpy as np
import pytest

from lyricgauge import (BackboneConfig, EmbeddingCache, MusicItem,
                        default_marker_signals, generate_corpus, synthetic_provider)

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(tag: str, passed: bool, detail: str = "") -> None:
    """Collect one pass/fail line per acceptance check for the final summary."""
    status = "PASS" if passed else "FAIL"
    suffix = f"  [{detail}]" if detail else ""
    ACCEPTANCE_LINES.append(f"acceptance {tag}: {status}{suffix}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def fd_gradient(f, params, indices, eps=1e-6):
    """Central finite differences of scalar f(params) at selected flat coords."""
    base = params.flatten()
    grads = np.empty(len(indices))
    probe = params.copy()
    for k, i in enumerate(indices):
        flat = base.copy()
        flat[i] += eps
        probe.load_flat(flat)
        up = f(probe)
        flat[i] -= 2 * eps
        probe.load_flat(flat)
        down = f(probe)
        grads[k] = (up - down) / (2 * eps)
    return grads


def rel_err(a, b, floor=1.0):
    return np.abs(a - b) / np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))


@pytest.fixture(scope="session")
def small_corpus() -> list[MusicItem]:
    return generate_corpus(24, seed=303)


@pytest.fixture(scope="session")
def small_cache(small_corpus) -> EmbeddingCache:
    return synthetic_provider(small_corpus, 10, 2, seed=303,
                              markers=default_marker_signals())


@pytest.fixture(scope="session")
def small_config() -> BackboneConfig:
    return BackboneConfig(d_sem=10, d_emo=2, hidden=6, proj=8)
