"""A nonzero defect with no positive eigenvalue.

The random corpus never produces this: there, C <= 0 always comes with
C = 0. But when W2 sits inside L = V1(E1 (x) W2) the defect can be a
nonzero negative projection. Only the product isometry is pure here,
not V1 or V2 on their own, so the classification records tt_ok = False.
"""

import numpy as np

from bclkit import analysis as A
from bclkit.model import build_pair, flip_twist, validate_triple


def build():
    e = np.eye(3)
    ul = np.vstack([e[0], e[2]])  # L = span(e1, e3) contains W2 = span(e3)
    upper = np.vstack([np.kron(np.eye(2)[b], e[1]) for b in range(2)])
    u = np.vstack([upper, np.kron(np.eye(2), ul)])
    return validate_triple(2, 2, u, e[:, 2:], twist=flip_twist(2, 2), name="W2 inside L")


def main():
    pair = build_pair(build())
    c = A.defect_operator(pair)
    print("defect C =")
    print(np.round(c.real, 12))
    print("eigenvalues:", np.round(np.linalg.eigvalsh(c), 12))
    r = A.classify(pair)
    print("negative-defect flags:", r.neg_flags)
    print("consistent:", r.consistent, " tt_ok:", r.tt_ok)


if __name__ == "__main__":
    main()
