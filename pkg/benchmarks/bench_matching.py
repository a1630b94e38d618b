#!/usr/bin/env python3
"""Compare the compiled scoring kernels against the pure fallback.

Times the exact call repair makes — one stored record subtree scored
against every same-label subtree of a page — on synthetic listings of
growing size, once with the jit kernels and once with
WRAPMEND_NO_NUMBA=1.  Both paths run the same code; the point of the
table is what the decorator buys at page scale.
"""

import argparse
import os
import random
import time

from wrapmend import kernels
from wrapmend.dom import parse_html
from wrapmend.matching import DEFAULT_LABELER


def listing(n_records: int, rng: random.Random) -> str:
    records = []
    for i in range(n_records):
        details = "".join(
            "<li>feature %d</li>" % rng.randrange(40) for _ in range(3)
        )
        records.append(
            '<div class="record"><span class="name">Item %d</span>'
            '<span class="price">%d.%02d</span><ul class="details">%s</ul></div>'
            % (i, rng.randrange(500), rng.randrange(100), details)
        )
    return '<html><body><div id="main">%s</div></body></html>' % "".join(records)


def time_scoring(stored, page, algorithm: str, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        kernels.score_against_page(stored, page, DEFAULT_LABELER, algorithm)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument(
        "--sizes", type=int, nargs="+", default=(25, 100, 400), help="records per page"
    )
    ap.add_argument("--repeats", type=int, default=5, help="timed runs, best-of")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not kernels.HAVE_NUMBA:
        print("numba is not importable; only the pure path can run")

    rng = random.Random(args.seed)
    pages = []
    for n in args.sizes:
        page = parse_html(listing(n, rng), source_id="bench-%d" % n)
        stored = page.root.children[0].children[0].children[0]
        pages.append((page.node_count, stored, page))

    if kernels.HAVE_NUMBA:
        os.environ.pop(kernels.DISABLE_VAR, None)
        # compile both kernels outside the timed region
        kernels.score_against_page(pages[0][1], pages[0][2], DEFAULT_LABELER, "weighted")
        kernels.score_against_page(pages[0][1], pages[0][2], DEFAULT_LABELER, "simple")

    print("%-9s %6s %12s %12s %9s" % ("algorithm", "nodes", "pure ms", "jit ms", "speedup"))
    for algorithm in ("weighted", "simple"):
        for nodes, stored, page in pages:
            os.environ[kernels.DISABLE_VAR] = "1"
            pure = time_scoring(stored, page, algorithm, args.repeats)
            row = [algorithm, nodes, "%.2f" % (pure * 1e3)]
            if kernels.HAVE_NUMBA:
                os.environ.pop(kernels.DISABLE_VAR, None)
                jit = time_scoring(stored, page, algorithm, args.repeats)
                row += ["%.2f" % (jit * 1e3), "%.1fx" % (pure / jit)]
            else:
                row += ["-", "-"]
            print("%-9s %6d %12s %12s %9s" % tuple(row))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
