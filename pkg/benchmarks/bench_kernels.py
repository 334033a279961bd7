"""Time the compiled kernels against the NumPy reference.

Run from the repo root after an editable install:

    python3 benchmarks/bench_kernels.py [--size WxH] [--repeats N]

Both backends are loaded directly, so the script works regardless of
the ROADPARALLAX_BACKEND override; it also reports the max deviation
between the two implementations on the benchmarked inputs (bilinear
gathers must agree bitwise).
"""

import argparse
import time

import numpy as np

from roadparallax._kernels import _ref

try:
    from roadparallax._kernels import _fast
except ImportError:
    _fast = None


def _best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _row(name, size, ref_s, fast_s, dev):
    fast_txt = f"{fast_s * 1e3:9.2f}" if fast_s is not None else "        -"
    speed = f"{ref_s / fast_s:6.1f}x" if fast_s is not None else "      -"
    print(f"{name:<18} {size:<12} {ref_s * 1e3:9.2f} {fast_txt} {speed}   {dev}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", default="320x192", help="image size as WxH")
    ap.add_argument("--repeats", type=int, default=5, help="take the best of N runs")
    ap.add_argument("--patch", type=int, default=7)
    ap.add_argument("--radius", type=int, default=8)
    args = ap.parse_args(argv)
    w, h = (int(v) for v in args.size.lower().split("x"))

    rng = np.random.default_rng(0)
    img = rng.random((h, w, 3))
    n = h * w
    xs = rng.uniform(0, w - 1, n)
    ys = rng.uniform(0, h - 1, n)

    # smooth single-channel pair with a known shift for the matcher
    base = rng.random((h + 8, w + 8))
    for _ in range(3):  # crude blur so patches have structure, not salt
        base = 0.25 * (
            base
            + np.roll(base, 1, axis=0)
            + np.roll(base, 1, axis=1)
            + np.roll(base, (1, 1), axis=(0, 1))
        )
    tgt = base[4 : 4 + h, 4 : 4 + w].copy()
    src = base[6 : 6 + h, 3 : 3 + w].copy()

    print(f"backends: reference=numpy, compiled={'yes' if _fast else 'missing'}")
    print(f"{'kernel':<18} {'workload':<12} {'numpy ms':>9} {'cython ms':>9} {'ratio':>7}   agreement")

    ref_g = _best_of(lambda: _ref.bilinear_gather(img, xs, ys), args.repeats)
    if _fast:
        fast_g = _best_of(lambda: _fast.bilinear_gather(img, xs, ys), args.repeats)
        a, av = _ref.bilinear_gather(img, xs, ys)
        b, bv = _fast.bilinear_gather(img, xs, ys)
        dev = "bitwise" if np.array_equal(a, b) and np.array_equal(av, bv) else "DIFFER"
    else:
        fast_g, dev = None, "n/a"
    _row("bilinear_gather", f"{n} taps", ref_g, fast_g, dev)

    bm_args = (src, tgt, args.patch, args.radius, 0.01)
    ref_b = _best_of(lambda: _ref.sad_block_match(*bm_args), args.repeats)
    if _fast:
        fast_b = _best_of(lambda: _fast.sad_block_match(*bm_args), args.repeats)
        fa, fav = _ref.sad_block_match(*bm_args)
        fb, fbv = _fast.sad_block_match(*bm_args)
        same_mask = np.array_equal(fav, fbv)
        gap = float(np.abs(fa[fav] - fb[fav]).max()) if same_mask and fav.any() else np.inf
        dev = f"masks equal, flow gap {gap:.1e}" if same_mask else "masks DIFFER"
    else:
        fast_b, dev = None, "n/a"
    _row("sad_block_match", f"{w}x{h}", ref_b, fast_b, dev)


if __name__ == "__main__":
    main()
