"""Compare the compiled kernel extension against the pure-Python fallback.

Measures the two hot primitives (single-block AES-256, xorshift128+) per
backend, then whole charge sessions through the scenario runner with each
backend patched in. Run from a checkout with the package installed:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --blocks 50000 --sessions 500
"""

import argparse
import random
import time

from evabs import _pykernels
from evabs import crypto
from evabs.scenario import ScenarioRunner
from evabs.registry import Registry

try:
    from evabs import _kernels as _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat):
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_kernels(kernels, blocks, seed):
    rng = random.Random(seed)
    key = rng.randbytes(32)
    block = rng.randbytes(16)
    encrypt = kernels.aes256_encrypt_block
    decrypt = kernels.aes256_decrypt_block
    step = kernels.xorshift128p_next

    enc = _time(lambda: encrypt(key, block), blocks)
    dec = _time(lambda: decrypt(key, block), blocks)

    def words():
        s0, s1 = 0x9E3779B97F4A7C15, seed | 1
        for _ in range(1000):
            _, s0, s1 = step(s0, s1)

    prn = _time(words, max(blocks // 1000, 1)) / 1000
    return enc, dec, prn


def bench_sessions(kernels, sessions, seed):
    # every cipher and generator call in the package goes through the
    # binding in evabs.crypto, so patching it times a full stack swap
    saved = crypto.kernels
    crypto.kernels = kernels
    try:
        rng = random.Random(seed)
        registry = Registry(group_key=rng.randbytes(32), tariff_per_second=2)
        record = registry.register(rng.randbytes(16), rng.randbytes(32), balance=10**9)
        runner = ScenarioRunner(registry, seed=seed)
        start = time.perf_counter()
        for _ in range(sessions):
            outcome = runner.run_session(record, duration=1500)
            assert outcome.phase == "completed"
        return sessions / (time.perf_counter() - start)
    finally:
        crypto.kernels = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--blocks", type=int, default=20_000, help="cipher calls per timing")
    parser.add_argument("--sessions", type=int, default=200, help="sessions per throughput run")
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    backends = [("pure-python", _pykernels)]
    if _ckernels is not None:
        backends.append(("compiled", _ckernels))
    else:
        print("note: compiled extension not built; timing the fallback only")

    print(f"kernels ({args.blocks} calls per timing, seed={args.seed})")
    print(f"{'backend':<14} {'aes-encrypt':>14} {'aes-decrypt':>14} {'xorshift128+':>14}")
    rows = {}
    for name, kernels in backends:
        enc, dec, prn = bench_kernels(kernels, args.blocks, args.seed)
        rows[name] = (enc, dec, prn)
        print(
            f"{name:<14} {enc * 1e6:>11.2f} us {dec * 1e6:>11.2f} us {prn * 1e6:>11.3f} us"
        )
    if len(rows) == 2:
        pure, fast = rows["pure-python"], rows["compiled"]
        print(
            f"{'speedup':<14} {pure[0] / fast[0]:>12.1f}x {pure[1] / fast[1]:>12.1f}x "
            f"{pure[2] / fast[2]:>12.1f}x"
        )

    print()
    print(f"full sessions through the runner ({args.sessions} per backend)")
    for name, kernels in backends:
        rate = bench_sessions(kernels, args.sessions, args.seed)
        print(f"{name:<14} {rate:>10.0f} sessions/s")


if __name__ == "__main__":
    main()
