"""Order reduction for 1 < alpha < 2 via an auxiliary chained system.

An order-alpha plant E D^alpha x = A x + B u is rewritten over the stacked
state z = (z1, ..., zk) with z1 = x and z_{i+1} = D^{alpha/k} z_i:

    Ebar D^{alpha/k} z = Abar z + Bbar u,   y = Cbar z,

with Ebar = diag(E, I, ..., I), Abar a block companion (identity blocks on
the superdiagonal, A in the bottom-left), Bbar the bottom block B and
Cbar = [C, 0, ..., 0].  Both systems share the transfer function
C (s^alpha E - A)^{-1} B, and the nonzero finite eigenvalues of the lifted
pencil are exactly the k-th roots (all branches) of the original ones.

One structural caveat governs everything downstream: for singular E the
lifted pencil det(mu*Ebar - Abar) = det(mu^k E - A) has degree k*deg while
rank(Ebar) = r + (k-1)n, so the lift itself always carries
(k-1)(n-r) extra infinite modes and is never impulse-free in the strict
sense -- no feedback can repair that, because the deficit comes from the
rows of Ebar, not from A.  Impulse-freeness of a lifted pair is therefore
judged against the threshold k*r (degree k*r corresponds exactly to an
impulse-free pair at the original order), and reports carry both the strict
and the effective verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import descriptor, synthesis
from .descriptor import AdmissibilityReport, DescriptorSystem
from .errors import InputError

__all__ = [
    "LiftedSystem",
    "LiftedReport",
    "lift",
    "transfer_function",
    "analyze_lifted_pair",
    "admissible_lifted",
    "synth_observer_lifted",
    "synth_output_feedback_lifted",
]

DEFAULT_K = 2


@dataclass(frozen=True)
class LiftedSystem:
    """Original plant plus its order-alpha/k auxiliary representation."""

    base: DescriptorSystem
    k: int
    lifted: DescriptorSystem


def lift(sys: DescriptorSystem, k: int = DEFAULT_K) -> LiftedSystem:
    """Build the chained auxiliary system of order alpha/k."""
    if not 1.0 < sys.alpha < 2.0:
        raise InputError(
            f"no lifting needed: order {sys.alpha} is already in (0, 1]"
            if sys.alpha <= 1.0 else f"order must be below 2, got {sys.alpha}")
    if k < 2:
        raise InputError("k must be at least 2")
    n = sys.n
    N = k * n
    Ebar = np.eye(N)
    Ebar[:n, :n] = sys.E
    Abar = np.zeros((N, N))
    for i in range(k - 1):
        Abar[i * n:(i + 1) * n, (i + 1) * n:(i + 2) * n] = np.eye(n)
    Abar[(k - 1) * n:, :n] = sys.A
    Bbar = np.zeros((N, sys.m))
    Bbar[(k - 1) * n:, :] = sys.B
    Cbar = np.zeros((sys.p, N))
    Cbar[:, :n] = sys.C
    lifted = DescriptorSystem(E=Ebar, A=Abar, B=Bbar, C=Cbar,
                              alpha=sys.alpha / k, rank_tol=sys.rank_tol)
    return LiftedSystem(base=sys, k=k, lifted=lifted)


def transfer_function(sys: DescriptorSystem, s: complex) -> np.ndarray:
    """G(s) = C (s^alpha E - A)^{-1} B on the principal branch of s^alpha."""
    return sys.C @ np.linalg.solve(
        complex(s) ** sys.alpha * sys.E - sys.A + 0j, sys.B.astype(complex))


@dataclass(frozen=True)
class LiftedReport:
    """Admissibility verdict for a pair living in lifted coordinates.

    ``strict`` is the plain pencil analysis at order alpha/k; its
    impulse_free is False for every lift of a singular-E plant (see module
    docstring).  ``effective_impulse_free`` applies the k*r degree
    threshold, which coincides with impulse-freeness of the original-order
    dynamics; ``admissible`` combines it with the strict regularity and
    stability verdicts.
    """

    strict: AdmissibilityReport
    k: int
    base_rank: int
    base_alpha: float
    effective_impulse_free: bool
    admissible: bool

    def to_dict(self) -> dict:
        return {
            "strict": self.strict.to_dict(),
            "k": self.k,
            "base_rank": self.base_rank,
            "base_alpha": self.base_alpha,
            "effective_impulse_free": self.effective_impulse_free,
            "admissible": self.admissible,
        }


def analyze_lifted_pair(Ebar, Abar, base_rank: int, k: int,
                        beta: float, rank_tol: float = descriptor.DEFAULT_RANK_TOL
                        ) -> LiftedReport:
    """Pencil analysis of a lifted pair with the structural degree threshold."""
    strict = descriptor.analyze_pair(Ebar, Abar, beta, rank_tol)
    effective = strict.regular and strict.pencil_degree >= k * base_rank
    return LiftedReport(
        strict=strict, k=k, base_rank=base_rank, base_alpha=beta * k,
        effective_impulse_free=effective,
        admissible=strict.regular and effective and strict.stable)


def admissible_lifted(sys: DescriptorSystem, k: int = DEFAULT_K) -> LiftedReport:
    """Admissibility of an order-(1,2) plant decided through its lift.

    Cross-checks the two spectral pictures: every finite eigenvalue mu of the
    lifted pencil must satisfy the order-alpha/k sector test exactly when
    mu^k (an eigenvalue of the original pencil) satisfies the order-alpha
    test.  A disagreement indicates numerical trouble and raises.
    """
    ls = lift(sys, k)
    report = analyze_lifted_pair(ls.lifted.E, ls.lifted.A, sys.r, k,
                                 ls.lifted.alpha, sys.rank_tol)
    base_report = descriptor.analyze(sys)
    half_base = sys.alpha * np.pi / 2.0
    half_lift = ls.lifted.alpha * np.pi / 2.0
    for mu in report.strict.finite_eigenvalues:
        if abs(mu) < 1e-9:
            continue
        lam = mu ** k
        in_base = abs(np.angle(lam)) > half_base
        in_lift = abs(np.angle(mu)) > half_lift
        # Non-principal root branches always land outside the narrower
        # sector, so only the principal branch carries information.
        if abs(np.angle(mu)) <= np.pi / k and in_base != in_lift:
            raise InputError(
                f"sector verdicts disagree between the lifted eigenvalue {mu} "
                f"and its power {lam}; analysis is numerically unreliable")
    if base_report.regular != report.strict.regular:
        raise InputError("regularity verdicts disagree between base and lift")
    return report


# ---------------------------------------------------------------------------
# Synthesis in lifted coordinates
# ---------------------------------------------------------------------------

def synth_observer_lifted(sys: DescriptorSystem, k: int = DEFAULT_K,
                          **kwargs) -> synthesis.ObserverDesign:
    """Estimated-state-feedback design for an order-(1,2) plant.

    Gains act on the lifted state (K is m x kn, L is kn x p); the returned
    closed-loop report is a :class:`LiftedReport` for the augmented pair in
    lifted coordinates.
    """
    ls = lift(sys, k)
    kwargs.setdefault("accept_marginal", True)
    design = synthesis.synth_observer(
        ls.lifted, verifier=_lifted_observer_verifier(sys.r, k), **kwargs)
    return design


def synth_output_feedback_lifted(sys: DescriptorSystem, k: int = DEFAULT_K,
                                 **kwargs) -> synthesis.OutputFeedbackDesign:
    """Static output-feedback design for an order-(1,2) plant.

    A static F in lifted coordinates is static in the original ones too
    (Cbar reads z1 = x only), so on success {E, A + BFC} at the original
    order is itself admissible; that pair is what the returned report's
    strict part would see through the degree threshold.
    """
    ls = lift(sys, k)
    kwargs.setdefault("accept_marginal", True)
    design = synthesis.synth_output_feedback(
        ls.lifted, verifier=_lifted_output_verifier(sys.r, k), **kwargs)
    return design


def _lifted_observer_verifier(base_rank: int, k: int):
    # The augmented pair stacks two copies of the plant, so the base-rank
    # threshold doubles along with it.
    def verify(lifted_sys: DescriptorSystem, K, L) -> LiftedReport:
        Ebar, Abar = synthesis.augmented_pair(lifted_sys, K, L)
        return analyze_lifted_pair(Ebar, Abar, 2 * base_rank, k,
                                   lifted_sys.alpha, lifted_sys.rank_tol)
    return verify


def _lifted_output_verifier(base_rank: int, k: int):
    def verify(lifted_sys: DescriptorSystem, F) -> LiftedReport:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        Acl = lifted_sys.A + lifted_sys.B @ F @ lifted_sys.C
        return analyze_lifted_pair(lifted_sys.E, Acl, base_rank, k,
                                   lifted_sys.alpha, lifted_sys.rank_tol)
    return verify
