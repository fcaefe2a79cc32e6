"""Walk through the scalar rotation family T_rot(theta).

Along the angle we follow the defect spectrum (closed form +-sin(theta))
next to the fringe F2 = [cos(theta)]. The last columns hold the squared
norm of the cross commutator on E1 (x) W2, which is sin(theta)^2, and the
distance to the brute-force oracle defect.
"""

import numpy as np

from bclkit import analysis as A
from bclkit.model import build_pair, t_rot
from bclkit.oracle import oracle_defect, truncate


def main():
    print(f"{'theta':>8} {'eig C':>22} {'F2':>8} {'|[V2*,V1]|^2':>14} {'oracle dev':>11}")
    for theta in np.linspace(0, np.pi / 2, 7):
        pair = build_pair(t_rot(theta))
        c = A.defect_operator(pair)
        w = np.linalg.eigvalsh(c)
        _, f2 = A.fringe_operators(pair)
        comm = np.linalg.norm(A.commutator_defect(pair, 1, 2)) ** 2
        dev = np.linalg.norm(c - oracle_defect(truncate(pair, 4)))
        print(f"{theta:8.4f} {w[0]:+10.6f} {w[1]:+10.6f} {abs(f2[0, 0]):8.5f} {comm:14.6f} {dev:11.1e}")
    print("\nAt theta = pi/2 the fringe F2 vanishes: its kernel and cokernel are both")
    print("one-dimensional, matching E1(C) and E-1(C), so the index stays 0.")
    rec = A.fredholm_record(build_pair(t_rot(np.pi / 2)))
    print(f"ker F2 = {rec.ker_f2}, coker F2 = {rec.coker_f2}, dim E-1 = {rec.dim_em1}, dim E1 = {rec.dim_e1}")


if __name__ == "__main__":
    main()
