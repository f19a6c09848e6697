import socket

import numpy as np
import pytest

import sonogrid._kernels_py as pure_kernels


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {name}: {outcome}", flush=True)


def kernel_lanes():
    """Both kernel implementations, so every lane is held to the same contract."""
    lanes = [pytest.param(pure_kernels, id="pure")]
    try:
        import sonogrid._kernels as compiled_kernels

        lanes.insert(0, pytest.param(compiled_kernels, id="compiled"))
    except ImportError:
        pass
    return lanes


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def sine_block_samples(amplitude: float, cycles: int, n: int, phase0: float = 0.0) -> np.ndarray:
    """Integer ADC samples of a bin-centered sine rebiased to mid-scale."""
    t = np.arange(n, dtype=np.float64)
    wave = 512.0 + amplitude * np.sin(2.0 * np.pi * cycles * t / n + phase0)
    return np.clip(np.rint(wave), 0, 1023).astype(np.int64)
