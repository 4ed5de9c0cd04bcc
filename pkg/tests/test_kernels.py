import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatlab import _kernels_py, kernels
from flatlab.errors import CornerHit, ZeroLength

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")


def _run_both(fn, *args):
    out = []
    for impl in (_kernels_py, kernels):
        try:
            out.append(("ok", getattr(impl, fn)(*args)))
        except (CornerHit, ZeroLength) as exc:
            out.append(("raised", type(exc)))
    return out


def _identical(a, b):
    if a[0] != b[0]:
        return False
    if a[0] == "raised":
        return a[1] is b[1]
    x, y = a[1], b[1]
    return all(np.array_equal(np.asarray(u), np.asarray(v)) for u, v in zip(x, y))


@compiled
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0, 2 * math.pi), st.integers(0, 20))
def test_windtree_parity(a, b, theta, record):
    p = ((1 + a) / 2, (1 + b) / 2)
    args = (a, b, p[0], p[1], math.cos(theta), math.sin(theta), np.geomspace(1.0, 2000.0, 7), 10 ** 10, record)
    py, cy = _run_both("windtree_run", *args)
    assert _identical(py, cy)


@compiled
@given(st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4), st.floats(1.0, 200.0))
def test_rauzy_parity(lengths, T):
    args = (np.array(lengths), np.array([0, 1, 2, 3]), np.array([3, 2, 1, 0]), T)
    py, cy = _run_both("rauzy_zorich_run", *args)
    assert _identical(py, cy)


def test_pure_python_fallback_selected_by_environment():
    env = dict(os.environ, FLATLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from flatlab import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_python_kernel_matches_rauzy_step():
    from flatlab.iet import IET, zorich_accelerate
    I = IET((0.93, 0.07), (0, 1), (1, 0))
    mats, times, lengths, perms = _kernels_py.rauzy_zorich_run(np.array(I.lengths), np.array(I.top),
                                                               np.array(I.bottom), 3.0)
    _, M, count = zorich_accelerate(I)
    assert count == 13 and np.array_equal(np.asarray(mats[0]), M)
    # thirteen subtractions leave lengths (0.02, 0.07)
    assert times[0] == pytest.approx(math.log(1.0 / 0.09))
