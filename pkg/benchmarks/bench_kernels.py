"""Compare the accelerated and pure-numpy convolution kernels.

Run twice to see both backends:

    python3 benchmarks/bench_kernels.py
    PROTOMM_DISABLE_NUMBA=1 python3 benchmarks/bench_kernels.py

or pass --both to fork a subprocess for the fallback path.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def bench(repeats: int):
    from protomm import kernels

    rng = np.random.default_rng(0)
    cases = [
        ("stem   B=32 C=4->32  T=400 K=11 s=2", (32, 4, 400), (32, 4, 11), 2),
        ("mid    B=32 C=64->64 T=100 K=11 s=1", (32, 64, 100), (64, 64, 11), 1),
        ("deep   B=32 C=256->256 T=25 K=11 s=2", (32, 256, 25), (256, 256, 11), 2),
    ]
    print(f"backend: {kernels.backend_name()}")
    for name, xs, ws, stride in cases:
        x = rng.standard_normal(xs).astype(np.float32)
        w = rng.standard_normal(ws).astype(np.float32)
        pad = ws[2] // 2
        y = kernels.conv1d_forward(x, w, stride, pad)  # warm-up / JIT
        gy = rng.standard_normal(y.shape).astype(np.float32)
        kernels.conv1d_grad_weight(x, gy, ws[2], stride, pad)
        kernels.conv1d_grad_input(gy, w, xs[2], stride, pad)
        timings = {}
        for label, fn in [
            ("fwd", lambda: kernels.conv1d_forward(x, w, stride, pad)),
            ("gw ", lambda: kernels.conv1d_grad_weight(x, gy, ws[2], stride, pad)),
            ("gx ", lambda: kernels.conv1d_grad_input(gy, w, xs[2], stride, pad)),
        ]:
            t0 = time.perf_counter()
            for _ in range(repeats):
                fn()
            timings[label] = (time.perf_counter() - t0) / repeats * 1e3
        line = "  ".join(f"{k}={v:7.3f} ms" for k, v in timings.items())
        print(f"{name}:  {line}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--both", action="store_true",
                        help="also run the pure-numpy fallback in a subprocess")
    args = parser.parse_args()
    bench(args.repeats)
    if args.both and not os.environ.get("PROTOMM_DISABLE_NUMBA"):
        env = dict(os.environ, PROTOMM_DISABLE_NUMBA="1")
        subprocess.run(
            [sys.executable, __file__, "--repeats", str(args.repeats)],
            env=env, check=True,
        )


if __name__ == "__main__":
    main()
