"""Smoke test for the lie_barrier_py extension module.

Build and install with `maturin develop -m crates/python/Cargo.toml`, then run
`python python/smoke_test.py`.
"""

import math

import lie_barrier_py as lb


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    m = lb.MarketParams(r=0.05, sigma=0.2, strike=100.0, maturity=1.0)
    assert close(m.alpha, 0.75, 1e-15)
    assert close(m.beta, 3.0625, 1e-15)

    barrier = lb.barrier_level(m, 0.0)
    assert close(barrier, 100.0 * math.exp(-0.05), 1e-15)

    p = lb.price(m, 110.0, 0.0)
    assert p.region == "interior"
    assert close(p.value, 110.0 - barrier, 1e-14), p
    assert lb.price(m, barrier, 0.0).region == "barrier"
    assert lb.price(m, 90.0, 0.0).value == 0.0

    g = lb.greeks(m, 110.0, 0.0)
    assert g.delta == 1.0 and g.gamma == 0.0
    assert close(g.theta, -0.05 * barrier, 1e-14)

    x, t, u = lb.to_heat(m, 110.0, 0.25, p.value)
    s, time, v = lb.from_heat(m, x, t, u)
    assert close(s, 110.0, 1e-12) and close(time, 0.25, 1e-12) and close(v, p.value, 1e-12)
    assert close(lb.heat_solution(m, 0.0, 0.0), 0.0, 1e-15)

    assert lb.solve_terminal_constraints(m).dimension == 1
    assert lb.solve_terminal_constraints(m, with_psi=True).dimension == 3
    c = lb.admissible_generator(m)
    assert close(c[3], -(2 * m.alpha + 1), 1e-15) and close(c[4], m.alpha**2 + m.alpha, 1e-15)

    red = lb.reduce(m)
    assert red.roots_kind == "distinct"
    assert close(red.fit_a, 1.0, 1e-12) and close(red.fit_b, -1.0, 1e-12)

    fd = lb.fd_price(m, 110.0, 0.0)
    assert abs(fd - p.value) / p.value < 1e-4, fd
    rows, order = lb.fd_study(m, [100, 200, 400])
    assert len(rows) == 3 and 1.7 <= order <= 2.3, order

    est = lb.mc_price(m, 110.0, n_paths=20_000, seed=7)
    assert abs(est.price - p.value) < 3 * est.std_error, est
    assert lb.mc_price(m, 110.0, n_paths=20_000, seed=7).price == est.price

    report = lb.verify_suite(m)
    assert report.passed and len(report.checks) == 12
    assert not lb.verify_suite(m, {"isc": 1e-30}).passed

    for bad in (lambda: lb.MarketParams(sigma=0.0), lambda: lb.greeks(m, 90.0, 0.0)):
        try:
            bad()
        except lb.BarrierError:
            pass
        else:
            raise AssertionError("expected BarrierError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
