"""Benchmark walkthrough at fractional order 1.2.

Same plant as demos/example1.py, but the order now lies in (1, 2), so the
synthesis LMIs do not apply directly.  The order-lifting transform rewrites
the dynamics as an equivalent order-0.6 descriptor system of twice the
dimension; synthesis then runs in lifted coordinates and the resulting
gains act on the original plant.  The script also shows why the lifted pair
can never be impulse-free in the strict sense and how the effective
criterion accounts for the structural rank deficit.

Run:  python3 demos/example2.py [output-dir]
"""

import json
import sys

import numpy as np

from sfos import (DescriptorSystem, SimConfig, admissible_lifted, analyze,
                  lift, simulate, synth_observer_lifted,
                  synth_output_feedback_lifted)

ALPHA = 1.2

PLANT = DescriptorSystem(
    E=np.array([[1.0, 1.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 0.0]]),
    A=np.array([[1.0, 1.0, -1.0], [2.0, -2.0, -1.0], [4.0, 1.0, -4.0]]),
    B=np.array([[1.0], [1.0], [1.0]]),
    C=np.array([[1.0, 0.0, 1.0]]),
    alpha=ALPHA)

X0 = np.array([-0.25, 2.0, 0.25])


def banner(text):
    print(f"\n=== {text} ===")


def main(out_dir="example2-out"):
    banner(f"Open-loop analysis (order {ALPHA})")
    report = analyze(PLANT)
    print(f"regular / impulse-free / stable: {report.regular} / "
          f"{report.impulse_free} / {report.stable}")
    print("-> same pencil as the order-0.6 case, but the stability sector "
          "|arg z| > alpha*pi/2 is now wider, so stabilizing is harder.")

    banner("Order lifting (k = 2)")
    ls = lift(PLANT, 2)
    L = ls.lifted
    print(f"lifted dimensions: n = {L.n}, order = {L.alpha}")
    print(f"rank(E_lifted) = {np.linalg.matrix_rank(L.E)} "
          f"vs k*rank(E) = {2 * PLANT.r}")
    lifted_report = admissible_lifted(PLANT)
    print(f"strict impulse-freeness: {lifted_report.strict.impulse_free} "
          "(structurally impossible: the lift adds n - rank(E) extra "
          "rank to E)")
    print(f"effective impulse-freeness: {lifted_report.effective_impulse_free}")

    banner("Synthesis in lifted coordinates")
    obs = synth_observer_lifted(PLANT)
    out = synth_output_feedback_lifted(PLANT, decay_shift=1.0)
    print(f"K (1x6, acts on the lifted state): {np.round(obs.K, 4)}")
    print(f"L (6x1): {np.round(obs.L.ravel(), 4)}")
    print(f"F (static, order-independent): "
          f"{np.round(np.atleast_2d(out.F), 4)}")
    print("certificates:",
          {k: c.status for k, c in obs.certificates.items()},
          {k: c.status for k, c in out.certificates.items()})
    print("-> 'Marginal' certificates are expected here: the structural "
          "rank deficit makes the lifted LMIs only weakly feasible, so the "
          "design is accepted on the strength of the independent "
          "closed-loop verification below.")
    print(f"closed loops admissible: observer "
          f"{obs.closed_loop_report.admissible}, output "
          f"{out.closed_loop_report.admissible}")

    banner("Simulation (T = 20, h = 1e-3, auto-lifted stepping)")
    cfg = SimConfig(h=1e-3, T=20.0, x0=X0, xhat0=np.zeros(3),
                    gate_first_input=True)
    traj_obs = simulate(PLANT, obs, cfg)
    cfg_out = SimConfig(h=1e-3, T=20.0, x0=X0, gate_first_input=True)
    traj_out = simulate(PLANT, ("output", out.F), cfg_out)
    for name, traj in (("observer loop", traj_obs), ("output loop", traj_out)):
        s = traj.summary()
        print(f"{name}: ||x(T)||/||x(0)|| = {s['final_norm_ratio']:.4f}, "
              f"algebraic residual = {s['max_algebraic_residual']:.2e}")
    print("-> final-norm ratios are an order of magnitude below the "
          "order-0.6 runs of example1 at the same horizon: higher "
          "fractional order means faster convergence once stabilized.")

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
