import os
import subprocess
import sys

import numpy as np
import pytest

from heatctl import _kernels as K
from heatctl import build_domain

pytestmark = pytest.mark.skipif(K.numba is None, reason="numba not installed")


@pytest.fixture(scope="module")
def dom():
    return build_domain(1.0, 0.25, 0.75, 24)


def test_gramians_agree(dom):
    lam, G = dom.lambdas, np.ascontiguousarray(dom.gram)
    for T in (1e-4, 0.01, 0.3):
        a, b = K.continuous_gramian_np(lam, G, T), K.continuous_gramian_nb(lam, G, T)
        assert np.allclose(a, b, rtol=1e-13, atol=0)
    for delta, k in ((1e-4, 3), (0.002, 40), (0.03, 2)):
        a, b = K.sampled_gramian_np(lam, G, delta, k), K.sampled_gramian_nb(lam, G, delta, k)
        assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_response_and_distance_agree(dom, rng):
    lam, G = dom.lambdas, np.ascontiguousarray(dom.gram)
    P = rng.standard_normal((17, 24))
    z = rng.standard_normal(24)
    delta = 0.002
    assert np.allclose(K.sampled_response_np(lam, G, P, delta), K.sampled_response_nb(lam, G, P, delta),
                       rtol=1e-12, atol=1e-15)
    for t_end in (0.01, 0.034, 0.03):
        a = K.sampled_adjoint_distance_sq_np(lam, G, P, delta, z, 0.034, t_end)
        b = K.sampled_adjoint_distance_sq_nb(lam, G, P, delta, z, 0.034, t_end)
        assert a == pytest.approx(b, rel=1e-12)


def test_distance_long_horizon(dom, rng):
    lam, G = dom.lambdas, np.ascontiguousarray(dom.gram)
    P = 1e-2 * rng.standard_normal((800, 24))
    z = rng.standard_normal(24)
    for t_end in (0.04, 0.0371234):
        a = K.sampled_adjoint_distance_sq_np(lam, G, P, 5e-5, z, 0.04, t_end)
        b = K.sampled_adjoint_distance_sq_nb(lam, G, P, 5e-5, z, 0.04, t_end)
        assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("flag", ["numpy", "numba"])
def test_backend_flag(flag):
    env = dict(os.environ, HEATCTL_BACKEND=flag)
    out = subprocess.run([sys.executable, "-c", "from heatctl import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == flag


def test_backends_give_same_solution():
    code = ("import numpy as np; from heatctl.acceptance import reference_setup;"
            "from heatctl.errorlab import sweep; r = reference_setup();"
            "row = sweep(r.domain, r.y0, r.target, r.M, [r.T_M / 12.25])[0];"
            "print(repr(row.T_gap), repr(row.ctrl_err_min_norm))")
    vals = []
    for flag in ("numpy", "numba"):
        env = dict(os.environ, HEATCTL_BACKEND=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        vals.append([float(v) for v in out.stdout.split()])
    assert vals[0] == pytest.approx(vals[1], rel=1e-10)
