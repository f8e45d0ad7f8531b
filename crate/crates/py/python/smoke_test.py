"""Quick end-to-end check of the modwave_py extension.

Build with `maturin develop` (or copy the cdylib next to this file as
modwave_py.so) and run `python smoke_test.py [configs/free.toml]`.
"""

import cmath
import math
import sys
import tempfile

import modwave_py as mw


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    xi = [math.pi / 3]
    close(mw.free_symbol(xi), 0.5, 1e-15)
    close(mw.velocity(xi)[0], -math.sin(math.pi / 3), 1e-15)

    box = mw.LatticeBox(1, 512)
    assert len(box) == 1025
    assert box.site(0) == [-512]

    window = mw.EnergyWindow(1, 0.3, 0.7)
    u = mw.wavepacket(box, window, xi, 0.15)
    close(sum(abs(z) ** 2 for z in u), 1.0, 1e-12)

    # Free evolution two ways: Chebyshev with V = 0 and the exact Fourier multiplier.
    prop = mw.Propagator(box, mw.Potential.zero(1))
    a = prop.propagate(u, 20.0)
    b = prop.propagate_free(u, 20.0)
    err = math.sqrt(sum(abs(p - q) ** 2 for p, q in zip(a, b)))
    assert err < 1e-10, err
    assert prop.boundary_mass(a, 16) < 1e-8

    v = mw.Potential.power(1, 0.02, 0.6)
    close(v.lattice_value([0]), 0.02, 1e-15)
    close(v.value([3.0]), 0.02 * 10 ** -0.3, 1e-15)
    w = mw.Propagator(box, v).propagate(u, 20.0)
    close(math.sqrt(sum(abs(z) ** 2 for z in w)), 1.0, 1e-10)

    delta0, delta, r0 = mw.escape_constants(window, v)
    assert 0 < delta <= delta0 and r0 == 0.0  # |V| <= c < delta everywhere

    x, xs, energy = mw.integrate_flow(v, [50.0], xi, [0.0, 10.0, 20.0])
    assert len(x) == 3 and x[2][0] < x[0][0]
    assert max(energy) - min(energy) < 1e-8

    try:
        mw.LatticeBox(0, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("dimension 0 accepted")

    if len(sys.argv) > 1:
        with tempfile.TemporaryDirectory() as out:
            run_dir, code = mw.run_experiment(sys.argv[1], "all", out)
            print(mw.report(run_dir))
            assert code == 0, f"run exited with {code}"

    assert not cmath.isnan(u[0])
    print(f"modwave_py {mw.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
