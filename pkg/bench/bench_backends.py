"""Compare the numba and numpy kernel backends.

Each backend runs in its own interpreter (the backend is fixed at import time
by HEATCTL_BACKEND). Kernels are warmed up once so numba compile time is not
counted, then timed with timeit; an end-to-end A-set sweep is timed too.

    python3 bench/bench_backends.py [--repeat 5] [--modes 64]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from heatctl import _kernels as K, build_domain
from heatctl.acceptance import reference_setup
from heatctl.errorlab import build_eta_set, sweep

repeat, J = int(sys.argv[1]), int(sys.argv[2])
d = build_domain(1.0, 0.25, 0.75, J)
lam, G = d.lambdas, np.ascontiguousarray(d.gram)
rng = np.random.default_rng(0)
P = rng.standard_normal((400, J))
z = rng.standard_normal(J)

cases = {
    "continuous_gramian": lambda: K.continuous_gramian(lam, G, 0.04),
    "sampled_gramian": lambda: K.sampled_gramian(lam, G, 1e-4, 400),
    "sampled_response (k=400)": lambda: K.sampled_response(lam, G, P, 1e-4),
    "distance_sq (k=400)": lambda: K.sampled_adjoint_distance_sq(lam, G, P, 1e-4, z, 0.04, 0.035),
}
out = {"backend": K.BACKEND}
for name, fn in cases.items():
    fn()
    n = 200
    out[name] = min(timeit.repeat(fn, number=n, repeat=repeat)) / n

ref = reference_setup(J=J)
eta = build_eta_set(ref.domain, ref.y0, ref.target, ref.M, 0.5, range(3, 41), T_M=ref.T_M)
deltas = [eta.sample_point(k) for k in eta.k_values]
run = lambda: sweep(ref.domain, ref.y0, ref.target, ref.M, deltas, eta_set=eta, with_family=True)
run()
out["A-set sweep (38 rows, family)"] = min(timeit.repeat(run, number=1, repeat=max(1, repeat // 2)))
print(json.dumps(out))
"""


def run(backend, repeat, modes):
    env = dict(os.environ, HEATCTL_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat), str(modes)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--modes", type=int, default=64)
    args = p.parse_args()
    nb = run("numba", args.repeat, args.modes)
    np_ = run("numpy", args.repeat, args.modes)
    if nb["backend"] != "numba":
        print("numba is not importable; both runs used numpy")
    print(f"J = {args.modes}, best of {args.repeat}")
    print(f"{'case':34s} {'numba':>12s} {'numpy':>12s} {'numpy/numba':>12s}")
    for key in nb:
        if key == "backend":
            continue
        a, b = nb[key], np_[key]
        print(f"{key:34s} {a * 1e6:10.1f}us {b * 1e6:10.1f}us {b / a:12.2f}")


if __name__ == "__main__":
    main()
