"""Throughput of the compiled event kernel against the pure-Python fallback.

Both kernels run the same replicas from the same streams; the script checks
that they return identical outcomes and reports events per second.

    python3 benchmarks/bench_kernels.py --replicas 200
"""
import argparse
import time

from spikenet import _pykernels
from spikenet.engine import ModelParams, full_configuration
from spikenet.network import build_complete, build_lattice
from spikenet.rng import replica_bitgen

try:
    from spikenet import _ckernels
except ImportError:
    _ckernels = None

CASES = [
    ("complete N=10, gamma=1", build_complete(10), 1.0),
    ("complete N=10, gamma=0.5", build_complete(10), 0.5),
    ("lattice N=200, gamma=2", build_lattice(200), 2.0),
    ("lattice N=50, gamma=1", build_lattice(50), 1.0),
]


def run(kernel, net, gamma, replicas, seed, horizon):
    ip, ix = net.post_csr
    start = list(full_configuration(net).active)
    out = []
    t0 = time.perf_counter()
    for r in range(replicas):
        out.append(tuple(kernel.run_extinction(ip, ix, start, ModelParams(gamma).gamma, horizon, -1,
                                               replica_bitgen(seed, r))))
    return time.perf_counter() - t0, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--horizon", type=float, default=200.0,
                   help="censoring time, keeps sub-critical cases bounded")
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled kernel not built; only the Python kernel is available")
    print(f"{'case':28s} {'events':>10s} {'python ev/s':>12s} {'compiled ev/s':>14s} {'speedup':>8s}")
    for name, net, gamma in CASES:
        tp, outp = run(_pykernels, net, gamma, args.replicas, args.seed, args.horizon)
        events = sum(o[2] for o in outp)
        line = f"{name:28s} {events:10d} {events / tp:12.3g}"
        if _ckernels is not None:
            tc, outc = run(_ckernels, net, gamma, args.replicas, args.seed, args.horizon)
            if outc != outp:
                raise SystemExit(f"{name}: kernels disagree")
            line += f" {events / tc:14.3g} {tp / tc:8.1f}x"
        print(line)


if __name__ == "__main__":
    main()
