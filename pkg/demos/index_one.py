"""Nonzero index on random (d1, d2, m, p) = (2, 2, 3, 1) triples.

Scalar triples always have index 0. Here W1 is one-dimensional, so the
fringe F2 maps the two-dimensional E2 (x) W1 onto W1 and must have a
kernel. The defect side sees this as one extra -1 eigenvalue, and the
truncated matrices agree.
"""

from bclkit import analysis as A
from bclkit.model import build_pair, random_triple
from bclkit.oracle import compare, truncate


def main():
    print(f"{'seed':>4} {'ker F2':>6} {'coker':>5} {'E-1':>4} {'E1':>3} {'index':>5} {'oracle':>6} {'max dev':>9}")
    for seed in range(6):
        pair = build_pair(random_triple(2, 2, 3, 1, seed=seed, twist="random" if seed % 2 else None))
        rec = A.fredholm_record(pair)
        cmp = compare(pair, truncate(pair, 4))
        print(
            f"{seed:4d} {rec.ker_f2:6d} {rec.coker_f2:5d} {rec.dim_em1:4d} {rec.dim_e1:3d}"
            f" {rec.index:5d} {cmp['index_oracle']:6d} {cmp['max_deviation']:9.1e}"
        )


if __name__ == "__main__":
    main()
