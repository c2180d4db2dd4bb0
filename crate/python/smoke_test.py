"""Smoke test for the gravdec_py extension.

Build and install first:  pip install --no-build-isolation -e crates/python
Then run:                 python python/smoke_test.py
"""

import math

import gravdec_py as g


def main():
    anchor = g.ModelParams.parse(1.0, "1mc", "30sb")
    assert anchor.region() == "RegionII"
    assert math.isclose(anchor.sigma_b, 1.5 * math.sqrt(3.0), rel_tol=1e-15)
    assert math.isclose(anchor.sigma, 30 * anchor.sigma_b, rel_tol=1e-15)

    t_f = anchor.t_f()
    assert math.isclose(anchor.kinetic_over_potential(t_f), 0.5, rel_tol=1e-12)

    est = g.final_purity(anchor, seed=1)
    print(est)
    assert abs(est.eta - 0.78) <= 0.03 and est.std_error <= 0.005
    assert est.imag_part == 0.0

    again = g.estimate_purity(anchor, t_f, seed=1)
    assert again.eta == est.eta

    zero = g.estimate_purity(anchor, 0.0)
    assert zero.eta == 1.0 and zero.std_error == 0.0

    assert g.classify_region(g.ModelParams.parse(1.0, "1.5mc", "30sb")) == "BeyondCut"
    try:
        g.estimate_purity(g.ModelParams.parse(1.0, "0.5mc", "0.5sb"))
    except g.RegionError as exc:
        print("refused:", exc)
    else:
        raise AssertionError("Region I point was not refused")
    try:
        g.ModelParams(1.0, -1.0, 5.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative mass accepted")

    assert math.isclose(g.erfcx(1.0), 0.42758357615580700441, rel_tol=1e-15)
    assert g.bracket_b(1.0) > 0.0
    print("gravdec_py", g.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
