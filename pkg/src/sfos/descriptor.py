"""Singular descriptor models and direct pencil analysis.

A descriptor system couples differential and algebraic equations through a
(possibly singular) matrix E on the derivative side:

    E d^alpha x / dt^alpha = A x + B u,      y = C x,    0 < alpha < 2.

This module decides the three classical pencil properties -- regularity,
impulse-freeness and fractional-sector stability -- and provides the
slow/fast decomposition used both by the simulator and (through its
annihilator bases) by the LMI synthesis machinery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InputError, NonsingularMatrixError, NotImpulseFreeError

__all__ = [
    "DescriptorSystem",
    "AnnihilatorPair",
    "Decomposition",
    "AdmissibilityReport",
    "numerical_rank",
    "annihilators",
    "pencil_polynomial",
    "analyze",
    "decompose",
    "system_from_dict",
    "system_from_json",
]

#: Default relative tolerance for numerical rank decisions.
DEFAULT_RANK_TOL = 1e-9

#: Eigenvalues whose sector angle sits within this distance of the boundary
#: |arg(lam)| = alpha*pi/2 are classified unstable (the sector is open).
ANGLE_BOUNDARY_TOL = 1e-9


def _as_matrix(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InputError(f"{name} must be a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError(f"{name} contains non-finite entries")
    return M


def numerical_rank(M, tol: float = DEFAULT_RANK_TOL) -> int:
    """Rank of ``M`` counted as singular values above ``tol * sigma_max``.

    The zero matrix has rank 0.  Raises :class:`InputError` for non-finite
    input or non-positive tolerance.
    """
    M = _as_matrix(M, "M")
    if tol <= 0:
        raise InputError("tol must be positive")
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


@dataclass(frozen=True)
class DescriptorSystem:
    """Immutable plant data (E, A, B, C) with fractional order ``alpha``.

    ``r`` is the numerical rank of E, computed at construction.  E may be
    nonsingular (r == n); operations that need a singular E say so.
    """

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    alpha: float
    rank_tol: float = DEFAULT_RANK_TOL
    r: int = field(init=False)

    def __post_init__(self):
        E = _as_matrix(self.E, "E")
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        n = E.shape[0]
        if E.shape != (n, n) or A.shape != (n, n):
            raise InputError("E and A must be square and of equal size")
        if B.shape[0] != n:
            raise InputError("B must have n rows")
        if C.shape[1] != n:
            raise InputError("C must have n columns")
        if not 0.0 < self.alpha < 2.0:
            raise InputError(f"alpha must lie in (0, 2), got {self.alpha}")
        for name, M in (("E", E), ("A", A), ("B", B), ("C", C)):
            M.flags.writeable = False
            object.__setattr__(self, name, M)
        object.__setattr__(self, "r", numerical_rank(E, self.rank_tol))

    @property
    def n(self) -> int:
        return self.E.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def with_matrices(self, **kwargs) -> "DescriptorSystem":
        """Copy with some of E, A, B, C, alpha replaced."""
        data = {"E": self.E, "A": self.A, "B": self.B, "C": self.C,
                "alpha": self.alpha, "rank_tol": self.rank_tol}
        data.update(kwargs)
        return DescriptorSystem(**data)


def system_from_dict(doc: dict, rank_tol: float = DEFAULT_RANK_TOL) -> DescriptorSystem:
    """Build a system from ``{"E": [[...]], "A": ..., "B": ..., "C": ..., "alpha": ...}``."""
    try:
        return DescriptorSystem(
            E=np.array(doc["E"], dtype=float),
            A=np.array(doc["A"], dtype=float),
            B=np.array(doc["B"], dtype=float),
            C=np.array(doc["C"], dtype=float),
            alpha=float(doc["alpha"]),
            rank_tol=rank_tol,
        )
    except KeyError as exc:
        raise InputError(f"system document is missing field {exc}") from exc


def system_from_json(path, rank_tol: float = DEFAULT_RANK_TOL) -> DescriptorSystem:
    with open(path, "r", encoding="utf-8") as fh:
        return system_from_dict(json.load(fh), rank_tol=rank_tol)


@dataclass(frozen=True)
class AnnihilatorPair:
    """Orthonormal bases of the right and left null spaces of E.

    ``E_right`` is n x (n-r) with E @ E_right = 0; ``E_left`` is (n-r) x n
    with E_left @ E = 0.  Any full-rank basis would do for the LMI criteria;
    orthonormal columns keep the assembled problems well conditioned.
    """

    E_right: np.ndarray
    E_left: np.ndarray


def annihilators(E, r: int | None = None, tol: float = DEFAULT_RANK_TOL) -> AnnihilatorPair:
    """Null-space bases of a singular E via SVD.

    Raises :class:`NonsingularMatrixError` when r == n: a nonsingular E means
    the plant is an ordinary fractional-order system and the singular-system
    criteria do not apply.
    """
    E = _as_matrix(E, "E")
    n = E.shape[0]
    if r is None:
        r = numerical_rank(E, tol)
    if r >= n:
        raise NonsingularMatrixError(
            "E is nonsingular; use the standard (non-singular) FOS path")
    U, _, Vt = np.linalg.svd(E)
    right = Vt[r:, :].T.copy()
    left = U[:, r:].T.copy()
    right.flags.writeable = False
    left.flags.writeable = False
    return AnnihilatorPair(E_right=right, E_left=left)


def pencil_polynomial(E, A, rel_tol: float = 1e-9) -> np.ndarray:
    """Coefficients (highest degree first) of det(s E - A).

    The determinant is sampled at n+1 Chebyshev-angle points on a circle of
    radius 1 + ||A|| / ||E|| (radius 1 + ||A|| if E == 0) and interpolated.
    Leading coefficients below ``rel_tol`` relative to the largest are
    trimmed, so ``len(result) - 1`` is the numerical degree.  The zero
    polynomial (non-regular pair) comes back as ``[0.0]``.
    """
    E = _as_matrix(E, "E")
    A = _as_matrix(A, "A")
    n = E.shape[0]
    if A.shape != E.shape:
        raise InputError("E and A must have equal shape")
    nE = np.linalg.norm(E, 2) if n else 0.0
    nA = np.linalg.norm(A, 2) if n else 0.0
    radius = 1.0 + (nA / nE if nE > 0 else nA)
    k = np.arange(n + 1)
    points = radius * np.exp(1j * np.pi * (2 * k + 1) / (2 * (n + 1)))
    dets = np.array([np.linalg.det(s * E - A) for s in points])

    # Scale for the all-zero decision: crude upper bound on |det| on the circle.
    scale = max((radius * nE + nA) ** n, 1.0)
    if np.all(np.abs(dets) < 1e-12 * scale):
        return np.zeros(1)

    coeffs = np.linalg.solve(np.vander(points, n + 1), dets)
    coeffs = np.real(coeffs)  # real pencil => real polynomial
    top = np.abs(coeffs).max()
    lead = 0
    while lead < len(coeffs) - 1 and abs(coeffs[lead]) <= rel_tol * top:
        lead += 1
    return coeffs[lead:]


@dataclass(frozen=True)
class Decomposition:
    """Slow/fast coordinates: E = M diag(I_r, 0) N and A = M [[A1,A2],[A3,A4]] N.

    ``Aa``/``Ba`` drive the slow (differential) state, ``Ab``/``Bb`` recover
    the fast (algebraic) state.  ``cond_A4`` reports how safely the fast
    block was inverted.
    """

    M: np.ndarray
    N: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A4: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Aa: np.ndarray
    Ab: np.ndarray
    Ba: np.ndarray
    Bb: np.ndarray
    cond_A4: float
    r: int


def _decompose_pair(E, A, B, r, tol):
    """Slow/fast split of a pair {E, A} with input matrix B."""
    n = E.shape[0]
    U, sv, Vt = np.linalg.svd(E)
    scale = np.concatenate([sv[:r], np.ones(n - r)])
    M = U @ np.diag(scale)
    N = Vt
    Minv = np.diag(1.0 / scale) @ U.T
    At = Minv @ A @ Vt.T
    Bt = Minv @ B
    A1, A2 = At[:r, :r], At[:r, r:]
    A3, A4 = At[r:, :r], At[r:, r:]
    B1, B2 = Bt[:r, :], Bt[r:, :]
    if n - r:
        sv4 = np.linalg.svd(A4, compute_uv=False)
        if sv4[-1] <= tol * max(sv4[0], 1.0):
            raise NotImpulseFreeError(
                "fast block A4 is numerically singular; the pair is not "
                "impulse-free and the slow/fast reduction is undefined")
        cond_A4 = float(sv4[0] / sv4[-1])
        A4inv_A3 = np.linalg.solve(A4, A3)
        A4inv_B2 = np.linalg.solve(A4, B2)
    else:
        cond_A4 = 1.0
        A4inv_A3 = np.zeros((0, r))
        A4inv_B2 = np.zeros((0, B.shape[1]))
    Aa = A1 - A2 @ A4inv_A3
    Ba = B1 - A2 @ A4inv_B2
    Ab = -A4inv_A3
    Bb = -A4inv_B2
    return Decomposition(M=M, N=N, A1=A1, A2=A2, A3=A3, A4=A4, B1=B1, B2=B2,
                         Aa=Aa, Ab=Ab, Ba=Ba, Bb=Bb, cond_A4=cond_A4, r=r)


def decompose(sys: DescriptorSystem) -> Decomposition:
    """Slow/fast decomposition of a regular, impulse-free system.

    Raises :class:`NotImpulseFreeError` if the fast block cannot be inverted.
    """
    return _decompose_pair(sys.E, sys.A, sys.B, sys.r, sys.rank_tol)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the pencil analysis.

    ``min_angle_margin`` is min over finite eigenvalues of
    |arg(lam)| - alpha*pi/2; a finite eigenvalue at zero contributes
    -alpha*pi/2 (the sector excludes the origin).  With no finite
    eigenvalues the margin is +inf and the pair is vacuously stable.
    """

    regular: bool
    impulse_free: bool
    stable: bool
    admissible: bool
    finite_eigenvalues: tuple
    min_angle_margin: float
    pencil_degree: int
    alpha: float

    def to_dict(self) -> dict:
        return {
            "regular": self.regular,
            "impulse_free": self.impulse_free,
            "stable": self.stable,
            "admissible": self.admissible,
            "finite_eigenvalues": [[ev.real, ev.imag] for ev in self.finite_eigenvalues],
            "min_angle_margin": self.min_angle_margin,
            "pencil_degree": self.pencil_degree,
            "alpha": self.alpha,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _sector_margin(eigs, alpha, zero_tol):
    """Smallest |arg(lam)| - alpha*pi/2 over the finite eigenvalues."""
    if len(eigs) == 0:
        return np.inf
    half = alpha * np.pi / 2.0
    scale = max(np.abs(eigs).max(), 1.0)
    margins = []
    for ev in eigs:
        if abs(ev) <= zero_tol * scale:
            margins.append(-half)  # origin is outside the open sector
        else:
            margins.append(abs(np.angle(ev)) - half)
    return float(min(margins))


def analyze_pair(E, A, alpha, rank_tol: float = DEFAULT_RANK_TOL) -> AdmissibilityReport:
    """Admissibility analysis of a bare pair {E, A} at order ``alpha``."""
    E = _as_matrix(E, "E")
    A = _as_matrix(A, "A")
    r = numerical_rank(E, rank_tol)
    coeffs = pencil_polynomial(E, A)
    regular = not (len(coeffs) == 1 and coeffs[0] == 0.0)
    degree = len(coeffs) - 1 if regular else -1
    impulse_free = regular and degree == r

    if not regular:
        eigs = ()
    elif degree == 0:
        eigs = ()
    else:
        roots = np.roots(coeffs)
        if impulse_free and r > 0:
            # Better-conditioned route: eigenvalues of the slow block.  The
            # polynomial roots stay available as a cross-check in the tests.
            try:
                dec = _decompose_pair(E, A, np.zeros((E.shape[0], 0)), r, rank_tol)
                roots = np.linalg.eigvals(dec.Aa)
            except NotImpulseFreeError:
                pass
        eigs = tuple(sorted(map(complex, roots), key=lambda z: (z.real, z.imag)))

    margin = _sector_margin(np.array(eigs), alpha, zero_tol=1e-12) if regular else -np.inf
    stable = regular and margin > ANGLE_BOUNDARY_TOL
    return AdmissibilityReport(
        regular=regular,
        impulse_free=impulse_free,
        stable=stable,
        admissible=regular and impulse_free and stable,
        finite_eigenvalues=eigs,
        min_angle_margin=margin,
        pencil_degree=degree,
        alpha=alpha,
    )


def analyze(sys: DescriptorSystem) -> AdmissibilityReport:
    """Admissibility (regular, impulse-free, stable) of the zero-input system."""
    return analyze_pair(sys.E, sys.A, sys.alpha, sys.rank_tol)
