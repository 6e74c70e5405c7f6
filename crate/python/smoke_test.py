"""Smoke test for the singplap extension module.

Build and install first, e.g. `pip install --no-build-isolation -e crates/python`
or `maturin develop -m crates/python/Cargo.toml`.
"""

import math

import singplap


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    mesh = singplap.Mesh.interval(0.0, 1.0, 200)
    assert mesh.node_count == 201 and mesh.dimension == 1
    xs = [c[0] for c in mesh.coords()]

    # -u'' = f/u with f = 2x(1-x) has the solution u = x(1-x)
    prob = singplap.Problem(mesh, p=2.0, gamma=1.0, f="2*x*(1-x)")
    sol = singplap.solve(prob)
    assert sol.converged, sol.outcome
    err = max(abs(u - x * (1 - x)) for x, u in zip(xs, sol.u))
    assert err < 1e-4, err
    report = sol.report()
    assert report["outcome"] == "converged"
    assert report["monotonicity_audit"] <= 1e-7

    # linear growth beyond the first eigenvalue has no solution
    big = singplap.Problem(mesh, p=2.0, gamma=1.0, q=1.0, f=1.0, g=1.5 * math.pi**2)
    assert singplap.solve(big).outcome == "diverged"

    cert = singplap.compare(
        singplap.Problem(mesh, 2.0, 1.0, f=1.0),
        singplap.Problem(mesh, 2.0, 1.0, f=2.0),
    )
    assert cert["holds"] and cert["certificate"]["final_sign_quantity"] <= 1e-10

    assert singplap.convexity_gap([1.0, 0.0], [0.0, 1.0], 3.0) >= 0.0
    assert singplap.truncate(5.0, 2.0) == 2.0
    assert singplap.cutoff(1.5, 1.0) == 0.5
    t = singplap.thresholds(1.8, m=2.0, p=3.0)
    assert t["ex_bound"] == 1.5 and t["plap_bound"] == 1.75
    assert not t["ex_gamma"] and not t["plap_gamma"] and t["cin_gamma"]

    c = singplap.poincare_constant(singplap.Mesh.interval(0.0, 1.0, 256))
    assert close(c, 1 / math.pi, 0.01 / math.pi), c

    u3 = singplap.solve_fixed_rhs(mesh, [4 * abs(1 - 2 * x) for x in xs], 3.0)
    assert max(abs(u - x * (1 - x)) for x, u in zip(xs, u3)) < 1e-3

    beta = singplap.boundary_exponent(mesh, [d**0.5 for d in mesh.boundary_distance()])
    assert close(beta, 0.5, 1e-12), beta

    print("singplap smoke test passed")


if __name__ == "__main__":
    main()
