"""Compare the compiled kernel extension against the numpy fallback.

Times each hot operation at the shapes the builtin graph actually uses,
plus one whole forward pass, and prints per-backend wall times with the
native-over-numpy speedup. Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 5 --ops conv2d,forward
"""

import argparse
import sys
import time

import numpy as np

from featpipe import kernels, ops
from featpipe.bundle import random_bundle
from featpipe.graph import builtin_alexnet_graph, forward


def _rand(rng, shape):
    return rng.standard_normal(shape, dtype=np.float32)


def _conv_cases(rng):
    """The five convolution layers of the builtin graph."""
    specs = [
        ("conv1", (3, 227, 227), (96, 3, 11, 11), 4, 0, 1),
        ("conv2", (96, 27, 27), (256, 48, 5, 5), 1, 2, 2),
        ("conv3", (256, 13, 13), (384, 256, 3, 3), 1, 1, 1),
        ("conv4", (384, 13, 13), (384, 192, 3, 3), 1, 1, 2),
        ("conv5", (384, 13, 13), (256, 192, 3, 3), 1, 1, 2),
    ]
    for name, x_shape, w_shape, stride, pad, groups in specs:
        x = _rand(rng, x_shape)
        w = _rand(rng, w_shape) * 0.05
        b = _rand(rng, (w_shape[0],))
        yield name, lambda x=x, w=w, b=b, s=stride, p=pad, g=groups: ops.conv2d(
            x, w, b, stride=s, pad=p, groups=g
        )


def _lrn_cases(rng):
    for name, shape in (("lrn 96x55x55", (96, 55, 55)), ("lrn 256x27x27", (256, 27, 27))):
        x = _rand(rng, shape)
        yield name, lambda x=x: ops.lrn(x, k=1.0, n=5, alpha=1e-4, beta=0.75)


def _maxpool_cases(rng):
    shapes = [(96, 55, 55), (256, 27, 27), (256, 13, 13)]
    for shape in shapes:
        x = _rand(rng, shape)
        yield f"maxpool {shape[0]}x{shape[1]}x{shape[2]}", (
            lambda x=x: ops.maxpool(x, size=3, stride=2)
        )


def _fc_cases(rng):
    specs = [("fc6", 9216, 4096), ("fc7", 4096, 4096), ("fc8", 4096, 1000)]
    for name, width, out in specs:
        x = _rand(rng, (width,))
        w = _rand(rng, (out, width)) * 0.01
        b = _rand(rng, (out,))
        yield name, lambda x=x, w=w, b=b: ops.fully_connected(x, w, b)


def _forward_case(rng):
    graph = builtin_alexnet_graph()
    bundle = random_bundle(seed=0, graph=graph)
    x = _rand(rng, (3, 227, 227))
    yield "full forward", lambda: forward(graph, bundle, x)


_GROUPS = {
    "conv2d": _conv_cases,
    "lrn": _lrn_cases,
    "maxpool": _maxpool_cases,
    "fully_connected": _fc_cases,
    "forward": _forward_case,
}


def _time(fn, repeats):
    """Best wall time over the given number of measured runs."""
    fn()  # warm up caches and any lazy setup
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3, help="measured runs per case (best is kept)")
    parser.add_argument("--seed", type=int, default=0, help="seed for the synthetic tensors")
    parser.add_argument(
        "--ops",
        default=",".join(_GROUPS),
        help="comma-separated subset of: " + ", ".join(_GROUPS),
    )
    args = parser.parse_args(argv)

    wanted = [name.strip() for name in args.ops.split(",") if name.strip()]
    unknown = [name for name in wanted if name not in _GROUPS]
    if unknown:
        parser.error(f"unknown ops: {', '.join(unknown)}")

    backends = ["numpy"] + (["native"] if kernels.HAVE_NATIVE else [])
    if not kernels.HAVE_NATIVE:
        print("note: compiled extension not built; timing the numpy fallback only")

    header = f"{'case':<18}" + "".join(f"{name + ' (ms)':>14}" for name in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for group in wanted:
        rng = np.random.default_rng(args.seed)
        for case_name, fn in _GROUPS[group](rng):
            times = []
            for backend in backends:
                with kernels.use_backend(backend):
                    times.append(_time(fn, args.repeats))
            row = f"{case_name:<18}" + "".join(f"{t * 1e3:>14.2f}" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)

    if kernels.HAVE_NATIVE and "forward" in wanted:
        rng = np.random.default_rng(args.seed)
        case_name, fn = next(_forward_case(rng))
        with kernels.use_backend("hybrid"):
            best = _time(fn, args.repeats)
        print(f"\ndefault (hybrid) {case_name}: {best * 1e3:.2f} ms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
