"""Smoke test for the finsler_lab extension module."""

import math

import finsler_lab as fl


def main():
    round_surface = fl.Surface.round()
    lo, hi = round_surface.curvature_range()
    assert abs(lo - 1) < 1e-6 and abs(hi - 1) < 1e-6

    surface = fl.Surface(0.49, 4.25)
    rows = surface.samples()
    assert rows[0][1] == 0.0 and len(rows[0]) == 4
    print(surface, "half length", round(surface.half_length, 6))

    metric = fl.Metric.window(1.0, 0.24)
    rev = metric.reversibility()
    assert abs(rev["value"] - 1.0) < 1e-9

    ret = fl.Metric(round_surface, 1.0).first_return(0.5)
    assert abs(ret["t_return"] - math.pi) < 1e-8

    cz = metric.equator_cz(2)
    assert cz["cz"] == 1, cz

    report = fl.shoot(1.0, 0.24)
    assert report["transverse_count"] == 1 and not report["failures"]
    print("figure eight: phi* = %.9f, length %.6f" % (report["phi_star"], report["length"]))

    a = fl.Knot.circle([1, 0, 0, 0], [0, 1, 0, 0])
    b = fl.Knot.circle([0, 0, 1, 0], [0, 0, 0, 1])
    link = fl.gauss_link(a, b)
    assert link["integer"] == 1
    assert fl.gauss_link(a.reversed(), b)["integer"] == -1
    assert a.self_linking() == -1

    x, v = fl.double_cover([1.0, 0.0, 0.0, 0.0])
    assert abs(sum(t * t for t in x) - 1) < 1e-12 and abs(sum(s * t for s, t in zip(x, v))) < 1e-12

    form = fl.ContactForm(1.0, 0.01, "quadratic")
    assert form.c2_norm() < 0.05
    scan = form.scan(cap=8.0, grid=2, seeds=1)
    periods = [o["period"] for o in scan["orbits"]]
    assert periods and all(abs(p - math.pi) < 0.05 for p in periods), periods
    print("short periods", sorted(round(p, 5) for p in periods))

    assert fl.mu_hat(0.5, 0.9) == 1
    print("ok")


if __name__ == "__main__":
    main()
