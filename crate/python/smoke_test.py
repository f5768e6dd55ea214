"""Smoke test for the nelson_lab extension module."""

import math
import os
import sys
import tempfile

import nelson_lab as nl


def main():
    p = nl.ModelParams(g=0.05, kappa=1.5, beta=1.2, gamma=0.25, zeta=0.05, theta=0.05, p=[0.2, 0.0, 0.0])
    print(p)

    rep = p.validate(5, 3, 2)
    assert rep["constraints"], rep

    s = nl.CutoffSchedule(p)
    for n in (1, 10, 100):
        assert 1.5 / 16 <= s.xi(n) <= 1.5 / 8, (n, s.xi(n))
    assert s.joint_n(3) == 6
    assert len(s.table(3, 2)["uv"]) == 4

    assert nl.basis_dimension(6, 2) == 28

    c = nl.appendix_constants(1.5)
    assert abs(c["c3"] - math.sqrt(1.5) / (2 * math.pi)) < 1e-10, c

    free = nl.uv_sweep(nl.ModelParams(g=0.0), 2)
    for r in free["records"]:
        assert abs(r["e_prime"] - 0.02) < 1e-12, r["e_prime"]

    trace = nl.uv_sweep(p, 2)
    e = [r["e_prime"] for r in trace["records"]]
    assert all(b <= a + 1e-9 for a, b in zip(e, e[1:])), e
    print("uv energies", e)

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "v.nmv")
        nl.write_nmv(path, [1.0, -2.5, 3.0])
        assert nl.read_nmv(path) == [1.0, -2.5, 3.0]

    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
