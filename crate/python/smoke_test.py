"""Smoke test for the pysteering extension module.

Build and install with `maturin build --release -o dist` in crates/python
and `pip install crates/python/dist/pysteering-*.whl`, then run this script.
"""

import json
import math

import pysteering as ps


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    epr = ps.Experiment.epr_reference()
    close(epr.chsh_value(), 2 * math.sqrt(2), 1e-9)
    close(epr.appendix_d_value(), 2.0, 1e-9)
    close(epr.singlet_fidelity(), 1.0, 1e-12)
    elements = epr.assemblage()
    assert len(elements) == 4
    close(sum(m[0][0].real + m[1][1].real for _, _, m in elements), 2.0, 1e-12)

    for setting in (1, 2):
        ghz = ps.Experiment.ghz_reference(setting)
        close(ghz.mermin_value(setting), 4.0, 1e-9)
        close(ghz.ghz_fidelity(setting), 1.0, 1e-12)

    rho = ps.Experiment.npair_reference(2).reduced_state()
    assert all(abs(rho[i][j] - (0.25 if i == j else 0.0)) < 1e-12 for i in range(4) for j in range(4))

    again = ps.Experiment.from_json(epr.to_json())
    close(again.chsh_value(), epr.chsh_value(), 0.0)

    report = json.loads(ps.Experiment.example_optimality(0.04).selftest_report(epr))
    assert report["state_distance"] >= 0.0

    r = ps.lower_bound("epr", 0.0)
    close(r.value, 1.0, 1e-6)
    assert r.status in ("optimal", "inaccurate")
    assert ps.lower_bound("epr", 0.0, normalized=False).value < 0.5

    rows = ps.sweep("ghz2", [0.0, 0.5])
    assert rows[0][1] >= rows[1][1] - 1e-8
    close(ps.fidelity_to_distance(0.995), 0.1, 1e-12)
    assert ps.dump("epr", 0.1).startswith("*")

    passed, evaluated, _ = ps.verify("lemma1", 50, 3)
    assert passed == evaluated == 50

    try:
        ps.lower_bound("chsh", 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown scenario accepted")

    print("pysteering smoke test passed")


if __name__ == "__main__":
    main()
