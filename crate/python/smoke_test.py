"""Smoke test of the Python bindings: load, solve, simulate, verify."""

import math
import pathlib
import tempfile

import exitgame_py as eg

EXAMPLES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "examples"


def eikonal():
    p = eg.Problem.load(str(EXAMPLES / "eikonal_1d.toml"))
    assert p.dims == (1, 1), p.dims
    v = eg.solve(p)
    exact = 1.0 - math.exp(-0.5)
    got = v.value_at([0.5], [0.0])
    assert abs(got - exact) < 0.05, got
    assert v.contraction <= math.exp(-p.discount * p.default_dt) + 1e-6
    x_excess, y_deficit = eg.boundary_check(p, v)
    assert x_excess <= 1e-8 and y_deficit <= 1e-8
    out = eg.simulate(p, v, [0.3], [0.0], [[0.0]], horizon=5.0)
    assert out["exit_case"] == "X_ONLY", out["exit_case"]
    assert abs(out["cost"] - v.value_at([0.3], [0.0])) < 0.05
    print(f"eikonal: V(0.5)={got:.4f} exact={exact:.4f} iterations={v.iterations}")


def pursuit():
    p = eg.Problem.load(str(EXAMPLES / "pursuit_1d.toml"))
    lower, upper, gap = eg.solve_both(p)
    assert gap <= 2e-9, gap
    assert len(lower) == len(upper) == 41 * 41
    assert eg.dpp(p, lower, [0.5], [0.5]) <= 1e-9 + 10 * p.default_dt**2
    err = eg.oracle_error(p, grid=[5, 5], dt=0.25)
    assert err <= 1e-9, err
    print(f"pursuit: gap={gap:.1e} oracle error={err:.1e}")


def bilinear_hamiltonian():
    text = """
name = "bilinear"
[omegaX]
lo = [0.0]
hi = [1.0]
[omegaY]
lo = [0.0]
hi = [1.0]
[controls]
A = [-1.0, 1.0]
B = [-1.0, 1.0]
[dynamics]
builtin = "eikonal"
lipschitz = 1.0
bound = 1.0
[costs]
discount = 1.0
running = [{ c = 1.0, a = [1], b = [1] }]
exit_x = 0.0
exit_y = 0.0
exit_xy = 0.0
"""
    p = eg.Problem.from_toml(text)
    value, gap, _, _ = p.hamiltonian([0.5], [0.5], [0.0], [0.0], "upper")
    assert (value, gap) == (1.0, 2.0), (value, gap)
    try:
        eg.Problem.from_toml("name = 1\n[omegaX\n")
    except ValueError as e:
        assert "line" in str(e), e
    else:
        raise AssertionError("malformed config accepted")
    print("bilinear: UH=1 gap=2")


def verify():
    with tempfile.TemporaryDirectory() as out:
        report = dict(eg.run_command(str(EXAMPLES / "pursuit_1d.toml"), "verify", out))
        assert report["status"] == "PASS", report
        assert (pathlib.Path(out) / "report.txt").exists()
    print("verify: PASS")


if __name__ == "__main__":
    eikonal()
    pursuit()
    bilinear_hamiltonian()
    verify()
    print("smoke test passed")
