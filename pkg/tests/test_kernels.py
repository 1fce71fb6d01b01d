import os
import subprocess
import sys

import numpy as np
import pytest

from ringdot import _kernels


def run(fn, floats, bad, ring):
    T, _, m = floats.shape
    covered = np.zeros((T, m), dtype=np.bool_)
    first = np.zeros(T, dtype=np.int64)
    fn(floats, bad, ring, covered, first, 0)
    return covered, first


@pytest.mark.parametrize("n,k,ring", [(5, 3, False), (7, 4, False), (8, 3, True), (11, 9, False), (10, 5, True)])
def test_numpy_and_loop_kernels_agree(n, k, ring):
    floats = np.random.default_rng(n * k).random((500, 12, n - 1))
    cov_np, first_np = run(_kernels.update_numpy, floats, k - 1, ring)
    cov_lp, first_lp = run(_kernels.update_loops, floats, k - 1, ring)
    assert np.array_equal(first_np, first_lp)
    assert np.array_equal(cov_np, cov_lp)


def test_offset_and_resume():
    floats = np.random.default_rng(0).random((300, 8, 6))
    _, whole = run(_kernels.update_numpy, floats, 2, False)
    covered = np.zeros((300, 6), dtype=np.bool_)
    first = np.zeros(300, dtype=np.int64)
    _kernels.update_numpy(floats[:, :3], 2, False, covered, first, 0)
    _kernels.update_numpy(floats[:, 3:], 2, False, covered, first, 3)
    assert np.array_equal(first, whole)


def test_malicious_players_never_covered():
    floats = np.random.default_rng(1).random((200, 10, 8))
    covered, _ = run(_kernels.update_numpy, floats, 3, False)
    assert not covered[:, :3].any()


def _backend(env):
    code = "from ringdot import _kernels; print(_kernels.BACKEND)"
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                          check=True).stdout.strip()


def test_env_flag_selects_numpy():
    env = dict(os.environ, **{_kernels.ENV_FLAG: "1"})
    assert _backend(env) == "numpy"


def test_default_backend():
    env = {k: v for k, v in os.environ.items() if k != _kernels.ENV_FLAG}
    try:
        import numba  # noqa: F401
        expected = "numba"
    except ImportError:
        expected = "numpy"
    assert _backend(env) == expected
