"""Smoke test for the mpsaqc_py extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import cmath
import json
import math

import mpsaqc_py as m


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    if not ok:
        raise SystemExit(1)


def main():
    psi = m.Mps.product("1010")
    check("product amplitude", abs(psi.amplitude("1010") - 1) < 1e-14)
    check("json round trip", abs(m.Mps.from_json(psi.to_json()).fidelity(psi) - 1) < 1e-14)

    h = m.Hamiltonian.preset("xxx", 6)
    psi0 = m.Mps.product("101010")
    e0 = h.energy(psi0)
    evolved = m.tebd_evolve(psi0, h, 0.05, 20)
    e1 = h.energy(evolved)
    check("energy conserved", abs(e1 - e0) < 1e-3, f"{e0:.6f} -> {e1:.6f}")
    check("norm", abs(evolved.norm() - 1) < 1e-12)

    dt, layers = 0.5, 2
    a = m.Ansatz(6, layers, h, dt)
    theta = a.trotter_parameters(h, dt, "101010")
    trotter = m.tebd_evolve(psi0, h, dt, layers)
    cost = a.cost(theta, trotter)
    check("trotter parameters reproduce the circuit", abs(cost) < 1e-8, f"cost={cost:.2e}")
    check("depth matches trotter", a.cnot_depth == h.trotter_depth(dt, layers), str(a.cnot_depth))

    g = a.gradient(theta, trotter, k=1)
    check("gradient length", len(g) == a.n_params)
    check("gradient vanishes at the exact point", max(map(abs, g)) < 1e-6)

    dense = a.apply(theta).to_dense()
    check("dense vector is normalized", abs(sum(abs(z) ** 2 for z in dense) - 1) < 1e-12)
    check("gate list header", a.gate_list(theta).startswith("qubits 6"))

    try:
        m.Mps.product("10x")
    except ValueError as e:
        check("bad input raises ValueError", True, str(e))

    report = json.loads(m.run("n = 4\nlayers = 2\ntime = 1.0\n[optimizer]\nmax_iter = 5\n"))
    f = report["fidelities"]
    check("pipeline run", report["status"] == "ok" and f["a1_gt"] >= f["t1_gt"] - 1e-12,
          f"a1={f['a1_gt']:.8f} t1={f['t1_gt']:.8f}")

    v0, v1 = (m.variance_probe(6, k, 20000, seed=3) for k in (0, 1))
    check("variance grows with k", v1 > v0 and not math.isnan(v0), f"{v0:.3e} {v1:.3e}")
    check("complex type", isinstance(psi.overlap(psi), complex) and cmath.isclose(psi.overlap(psi), 1))
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
