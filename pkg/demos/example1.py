"""Benchmark walkthrough at fractional order 0.6.

A three-state descriptor plant with a singular E (one purely algebraic row)
is unstable in open loop.  The script analyzes it, designs both an
observer-based estimated-state-feedback controller and a static output
feedback gain via the LMI machinery, verifies each closed loop
independently of the solver, and simulates the results with the
Grünwald-Letnikov stepper.

Run:  python3 demos/example1.py [output-dir]
"""

import json
import sys

import numpy as np

from sfos import (DescriptorSystem, SimConfig, analyze, simulate,
                  synth_observer, synth_output_feedback)

ALPHA = 0.6

PLANT = DescriptorSystem(
    E=np.array([[1.0, 1.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 0.0]]),
    A=np.array([[1.0, 1.0, -1.0], [2.0, -2.0, -1.0], [4.0, 1.0, -4.0]]),
    B=np.array([[1.0], [1.0], [1.0]]),
    C=np.array([[1.0, 0.0, 1.0]]),
    alpha=ALPHA)

X0 = np.array([-0.25, 2.0, 0.25])


def banner(text):
    print(f"\n=== {text} ===")


def main(out_dir="example1-out"):
    banner(f"Open-loop analysis (order {ALPHA})")
    report = analyze(PLANT)
    print(f"regular:       {report.regular}")
    print(f"impulse-free:  {report.impulse_free}")
    print(f"stable:        {report.stable}")
    print(f"finite eigenvalues: {np.round(report.finite_eigenvalues, 4)}")
    print("-> the eigenvalue in the right half-plane makes the open loop "
          "unstable; feedback is required.")

    banner("Observer-based estimated-state feedback")
    # The spectral shifts push the closed-loop spectrum further left than
    # bare feasibility would; power-law tails are otherwise slow to settle.
    obs = synth_observer(PLANT, decay_shift_state=2.0,
                         decay_shift_injection=6.0)
    print(f"K = {np.round(obs.K, 4)}")
    print(f"L = {np.round(obs.L.ravel(), 4)}")
    print(f"closed loop admissible: {obs.closed_loop_report.admissible}")
    print("certificates:",
          {k: c.status for k, c in obs.certificates.items()})

    banner("Static output feedback")
    out = synth_output_feedback(PLANT, decay_shift=2.0)
    print(f"F = {np.round(np.atleast_2d(out.F), 4)}")
    print(f"closed loop admissible: {out.closed_loop_report.admissible}")

    banner("Simulation (T = 20, h = 1e-3)")
    cfg = SimConfig(h=1e-3, T=20.0, x0=X0, xhat0=np.zeros(3),
                    gate_first_input=True)
    traj_obs = simulate(PLANT, obs, cfg)
    cfg_out = SimConfig(h=1e-3, T=20.0, x0=X0, gate_first_input=True)
    traj_out = simulate(PLANT, ("output", out.F), cfg_out)
    for name, traj in (("observer loop", traj_obs), ("output loop", traj_out)):
        s = traj.summary()
        print(f"{name}: ||x(T)||/||x(0)|| = {s['final_norm_ratio']:.4f}, "
              f"algebraic residual = {s['max_algebraic_residual']:.2e}, "
              f"tail decay exponent = {s['tail_decay_exponent']:.2f}")
    print("-> both loops settle below 5% of the initial norm; the tail "
          f"decays like t^(-{ALPHA}), the signature of a fractional system.")

    import os
    os.makedirs(out_dir, exist_ok=True)
    traj_obs.to_csv(os.path.join(out_dir, "observer_loop.csv"))
    traj_out.to_csv(os.path.join(out_dir, "output_loop.csv"))
    with open(os.path.join(out_dir, "gains.json"), "w") as fh:
        json.dump({"K": obs.K.tolist(), "L": obs.L.tolist(),
                   "F": np.atleast_2d(out.F).tolist()}, fh, indent=2)
    print(f"\ntrajectories and gains written to {out_dir}/")


if __name__ == "__main__":
    main(*sys.argv[1:2])
