"""Affine matrix-inequality modelling and a self-contained feasibility solver.

A feasibility problem is a list of symmetric affine blocks F_j(x) over scalar
decision slots, asked to satisfy F_j(x) < 0 strictly.  The solver minimizes
the shared epigraph variable t subject to F_j(x) <= t*I and a box |x_i| <=
box_bound (the inequalities are homogeneous, so the box just normalizes
scale), using a log-det barrier with damped Newton steps.  Problems here are
desk-scale (a few dozen slots, blocks up to ~24x24), so dense factorizations
throughout are deliberate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InputError, LmiNumericalError

__all__ = [
    "VariableRegistry",
    "AffineExpr",
    "LmiBlock",
    "LmiSolution",
    "sym_of",
    "block_of",
    "solve_feasibility",
]

DEFAULT_FEAS_MARGIN = 1e-7
DEFAULT_BOX_BOUND = 1e4
DUALITY_TOL = 1e-9
MAX_NEWTON_STEPS = 2000
# Approximate centering suffices for path-following; this bounds the squared
# Newton decrement at which an inner centering loop stops.
CENTERING_TOL = 1e-6


# ---------------------------------------------------------------------------
# Decision variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _VarEntry:
    name: str
    kind: str           # "symmetric" | "skew" | "rectangular"
    shape: tuple
    start: int
    count: int


class VariableRegistry:
    """Flat scalar-slot layout for named structured matrix variables.

    A symmetric k x k variable owns k(k+1)/2 slots (upper triangle), a skew
    variable k(k-1)/2 (strict upper triangle), a rectangular k x l variable
    k*l.  Slot ranges are contiguous and disjoint in registration order.
    """

    def __init__(self):
        self._entries: dict[str, _VarEntry] = {}
        self._num_slots = 0

    @property
    def num_slots(self) -> int:
        return self._num_slots

    @property
    def names(self):
        return list(self._entries)

    def add(self, name: str, kind: str, rows: int, cols: int | None = None) -> str:
        if name in self._entries:
            raise InputError(f"variable {name!r} already registered")
        if kind == "symmetric":
            shape, count = (rows, rows), rows * (rows + 1) // 2
        elif kind == "skew":
            shape, count = (rows, rows), rows * (rows - 1) // 2
        elif kind == "rectangular":
            if cols is None:
                raise InputError("rectangular variables need a column count")
            shape, count = (rows, cols), rows * cols
        else:
            raise InputError(f"unknown variable kind {kind!r}")
        self._entries[name] = _VarEntry(name, kind, shape, self._num_slots, count)
        self._num_slots += count
        return name

    def entry(self, name: str) -> _VarEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise InputError(f"unknown variable {name!r}") from None

    def _basis(self, entry: _VarEntry):
        """Yield (slot index, basis matrix) pairs for one variable."""
        rows, cols = entry.shape
        slot = entry.start
        if entry.kind == "symmetric":
            for i in range(rows):
                for j in range(i, rows):
                    M = np.zeros(entry.shape)
                    M[i, j] = 1.0
                    M[j, i] = 1.0
                    yield slot, M
                    slot += 1
        elif entry.kind == "skew":
            for i in range(rows):
                for j in range(i + 1, rows):
                    M = np.zeros(entry.shape)
                    M[i, j] = 1.0
                    M[j, i] = -1.0
                    yield slot, M
                    slot += 1
        else:
            for i in range(rows):
                for j in range(cols):
                    M = np.zeros(entry.shape)
                    M[i, j] = 1.0
                    yield slot, M
                    slot += 1

    def expr(self, name: str) -> "AffineExpr":
        """Affine expression equal to the named matrix variable."""
        entry = self.entry(name)
        coeffs = {slot: M for slot, M in self._basis(entry)}
        return AffineExpr(entry.shape, np.zeros(entry.shape), coeffs)

    def materialize(self, name: str, assignment: np.ndarray) -> np.ndarray:
        """Matrix value of one variable under a scalar assignment."""
        entry = self.entry(name)
        M = np.zeros(entry.shape)
        for slot, basis in self._basis(entry):
            M += assignment[slot] * basis
        return M

    def materialize_all(self, assignment: np.ndarray) -> dict:
        return {name: self.materialize(name, assignment) for name in self._entries}


# ---------------------------------------------------------------------------
# Affine matrix expressions
# ---------------------------------------------------------------------------

class AffineExpr:
    """Matrix-valued expression ``const + sum_i x_i * coeffs[i]``.

    Supports addition, negation, transpose, scaling, multiplication by
    constant matrices on either side, and block composition via
    :meth:`bmat` -- enough to assemble the synthesis inequalities without
    ever forming products of two unknowns (which would not be affine).
    """

    __array_priority__ = 100  # keep ndarray @ AffineExpr out of numpy's hands

    def __init__(self, shape, const, coeffs):
        self.shape = tuple(shape)
        self.const = np.asarray(const, dtype=float)
        self.coeffs = {int(s): np.asarray(M, dtype=float) for s, M in coeffs.items()}
        if self.const.shape != self.shape:
            raise InputError("constant term shape mismatch")
        for M in self.coeffs.values():
            if M.shape != self.shape:
                raise InputError("coefficient shape mismatch")

    @staticmethod
    def constant(M) -> "AffineExpr":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return AffineExpr(M.shape, M, {})

    @staticmethod
    def _coerce(other):
        if isinstance(other, AffineExpr):
            return other
        return AffineExpr.constant(other)

    @property
    def T(self) -> "AffineExpr":
        return AffineExpr(self.shape[::-1], self.const.T,
                          {s: M.T for s, M in self.coeffs.items()})

    def __neg__(self):
        return AffineExpr(self.shape, -self.const,
                          {s: -M for s, M in self.coeffs.items()})

    def __add__(self, other):
        other = self._coerce(other)
        if other.shape != self.shape:
            raise InputError(f"shape mismatch in +: {self.shape} vs {other.shape}")
        coeffs = dict(self.coeffs)
        for s, M in other.coeffs.items():
            coeffs[s] = coeffs[s] + M if s in coeffs else M
        return AffineExpr(self.shape, self.const + other.const, coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, scalar):
        scalar = float(scalar)
        return AffineExpr(self.shape, scalar * self.const,
                          {s: scalar * M for s, M in self.coeffs.items()})

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, AffineExpr):
            if not other.coeffs:
                other = other.const
            elif not self.coeffs:
                return _left_mul(self.const, other)
            else:
                raise InputError("product of two variable expressions is not affine")
        M = np.atleast_2d(np.asarray(other, dtype=float))
        return AffineExpr((self.shape[0], M.shape[1]), self.const @ M,
                          {s: C @ M for s, C in self.coeffs.items()})

    def __rmatmul__(self, other):
        return _left_mul(np.atleast_2d(np.asarray(other, dtype=float)), self)

    @staticmethod
    def bmat(rows) -> "AffineExpr":
        """Block composition; entries are AffineExpr or constant matrices."""
        rows = [[AffineExpr._coerce(e) for e in row] for row in rows]
        heights = [row[0].shape[0] for row in rows]
        widths = [e.shape[1] for e in rows[0]]
        for row, h in zip(rows, heights):
            if len(row) != len(widths):
                raise InputError("ragged block structure")
            for e, w in zip(row, widths):
                if e.shape != (h, w):
                    raise InputError("inconsistent block shapes")
        shape = (sum(heights), sum(widths))
        const = np.zeros(shape)
        coeffs: dict[int, np.ndarray] = {}
        r0 = 0
        for row, h in zip(rows, heights):
            c0 = 0
            for e, w in zip(row, widths):
                const[r0:r0 + h, c0:c0 + w] = e.const
                for s, M in e.coeffs.items():
                    if s not in coeffs:
                        coeffs[s] = np.zeros(shape)
                    coeffs[s][r0:r0 + h, c0:c0 + w] += M
                c0 += w
            r0 += h
        return AffineExpr(shape, const, coeffs)

    def evaluate(self, assignment: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for s, M in self.coeffs.items():
            out += assignment[s] * M
        return out


def _left_mul(M: np.ndarray, expr: AffineExpr) -> AffineExpr:
    return AffineExpr((M.shape[0], expr.shape[1]), M @ expr.const,
                      {s: M @ C for s, C in expr.coeffs.items()})


# ---------------------------------------------------------------------------
# Blocks and solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LmiBlock:
    """Symmetric affine block F(x) = F0 + sum_i x_i F_i, constrained F(x) < 0."""

    F0: np.ndarray
    terms: tuple          # of (slot, symmetric matrix)
    label: str = ""

    @property
    def dim(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, assignment: np.ndarray) -> np.ndarray:
        F = self.F0.copy()
        for s, M in self.terms:
            F += assignment[s] * M
        return F


def _symmetrize(M: np.ndarray, what: str) -> np.ndarray:
    sym = (M + M.T) / 2.0
    skew = np.abs(M - M.T).max()
    if skew > 1e-9 * max(np.abs(M).max(), 1.0):
        raise InputError(f"{what} is not symmetric (asymmetry {skew:.3e})")
    return sym


def sym_of(expr: AffineExpr, label: str = "") -> LmiBlock:
    """Block for sym(expr) = expr + expr^T < 0."""
    if expr.shape[0] != expr.shape[1]:
        raise InputError("sym_of needs a square expression")
    s = expr + expr.T
    terms = tuple((slot, (M + M.T) / 2.0) for slot, M in sorted(s.coeffs.items()))
    return LmiBlock(F0=(s.const + s.const.T) / 2.0, terms=terms, label=label)


def block_of(expr: AffineExpr, label: str = "") -> LmiBlock:
    """Block for an expression that is already symmetric by construction."""
    if expr.shape[0] != expr.shape[1]:
        raise InputError("block_of needs a square expression")
    F0 = _symmetrize(expr.const, f"constant term of {label or 'block'}")
    terms = tuple((slot, _symmetrize(M, f"coefficient {slot} of {label or 'block'}"))
                  for slot, M in sorted(expr.coeffs.items()))
    return LmiBlock(F0=F0, terms=terms, label=label)


@dataclass(frozen=True)
class LmiSolution:
    """Outcome of a feasibility solve.

    ``t`` is the achieved epigraph value, ``lower_bound`` the barrier-duality
    lower bound on the optimal t.  Feasible guarantees every margin (the
    independently recomputed lambda_max of each block) is <= -feas_margin.
    """

    status: str                         # "Feasible" | "Infeasible" | "NumericalFailure"
    assignment: np.ndarray | None
    #: Final interior iterate regardless of status.  Weakly feasible
    #: (marginal) problems never produce a strict witness; callers that can
    #: verify a recovered design independently may fall back on this.
    witness: np.ndarray | None
    margins: tuple
    t: float
    lower_bound: float
    newton_steps: int
    feas_margin: float
    box_bound: float
    block_labels: tuple = ()

    @property
    def feasible(self) -> bool:
        return self.status == "Feasible"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "assignment": None if self.assignment is None else list(self.assignment),
            "witness": None if self.witness is None else list(self.witness),
            "margins": list(self.margins),
            "t": self.t,
            "lower_bound": self.lower_bound,
            "newton_steps": self.newton_steps,
            "feas_margin": self.feas_margin,
            "box_bound": self.box_bound,
            "block_labels": list(self.block_labels),
        }


# ---------------------------------------------------------------------------
# Barrier solver
# ---------------------------------------------------------------------------

def _chol_or_none(S):
    try:
        return sla.cholesky(S, lower=True, check_finite=False)
    except sla.LinAlgError:
        return None


class _Barrier:
    """Log-det barrier for {F_j(x) <= t I, |x_i| <= box} in z = (x, t)."""

    def __init__(self, blocks, num_slots, box):
        self.blocks = blocks
        self.nx = num_slots
        self.box = box
        # Barrier parameter: block dims plus two log terms per box slot.
        self.nu = sum(b.dim for b in blocks) + 2 * num_slots

    def slacks(self, z):
        """Cholesky factors of t*I - F_j(x), or None if not interior."""
        x, t = z[:-1], z[-1]
        if np.abs(x).max(initial=0.0) >= self.box:
            return None
        factors = []
        for b in self.blocks:
            S = t * np.eye(b.dim) - b.evaluate(x)
            L = _chol_or_none(S)
            if L is None:
                return None
            factors.append(L)
        return factors

    def value(self, z, factors):
        x = z[:-1]
        val = 0.0
        for L in factors:
            val -= 2.0 * np.sum(np.log(np.diag(L)))
        val -= np.sum(np.log(self.box - x)) + np.sum(np.log(self.box + x))
        return val

    def grad_hess(self, z, factors):
        nz = self.nx + 1
        g = np.zeros(nz)
        H = np.zeros((nz, nz))
        x = z[:-1]
        for b, L in zip(self.blocks, factors):
            # S = t I - F(x); barrier -logdet S.
            # d/dx_i = tr(S^-1 F_i), d/dt = -tr(S^-1).
            Sinv = sla.cho_solve((L, True), np.eye(b.dim), check_finite=False)
            idx = [self.nx] + [s for s, _ in b.terms]
            mats = [-Sinv] + [Sinv @ M for _, M in b.terms]
            for a, (ia, Ma) in enumerate(zip(idx, mats)):
                g[ia] += np.trace(Ma)
                for ib, Mb in zip(idx[a:], mats[a:]):
                    h = float(np.sum(Ma * Mb.T))
                    H[ia, ib] += h
                    if ia != ib:
                        H[ib, ia] += h
        up, dn = 1.0 / (self.box - x), 1.0 / (self.box + x)
        g[:-1] += up - dn
        H[np.arange(self.nx), np.arange(self.nx)] += up ** 2 + dn ** 2
        return g, H

    def dual_lower_bound(self, factors, tilt_x):
        """Rigorous lower bound on min(t + tilt_x . x) from the current slacks.

        For any Z_j >= 0 with sum tr(Z_j) = 1, weak duality gives the bound
        sum_j <F_j0, Z_j> - box * sum_i |c_i + sum_j <F_ji, Z_j>| where the
        second term absorbs the x-stationarity residual into the box
        multipliers.  Z_j is taken proportional to the inverse slacks, which
        tightens the bound as the iterate approaches the central path, but
        the bound is valid at every interior point.
        """
        Sinvs = [sla.cho_solve((L, True), np.eye(L.shape[0]), check_finite=False)
                 for L in factors]
        total = sum(np.trace(S) for S in Sinvs)
        bound = 0.0
        resid = tilt_x.copy()
        for b, Sinv in zip(self.blocks, Sinvs):
            Z = Sinv / total
            bound += float(np.sum(b.F0 * Z))
            for s, M in b.terms:
                resid[s] += float(np.sum(M * Z))
        return bound - self.box * float(np.sum(np.abs(resid)))


def solve_feasibility(blocks, registry, feas_margin: float = DEFAULT_FEAS_MARGIN,
                      box_bound: float = DEFAULT_BOX_BOUND, objective=None,
                      max_newton: int = MAX_NEWTON_STEPS,
                      debug_trace=None) -> LmiSolution:
    """Decide strict feasibility of F_j(x) < 0 over the registry's slots.

    Minimizes t subject to F_j(x) <= t*I and |x_i| <= box_bound by
    path-following on a log-det barrier (10x barrier-weight increase per
    outer step, damped Newton inner steps).  Classification: Feasible when
    the achieved t is <= -feas_margin; Infeasible when the duality lower
    bound proves no point in the box reaches margin -feas_margin;
    NumericalFailure when the step budget runs out in the gap between the
    two.  The two verdicts share the same threshold, so "Infeasible" means
    precisely "not feasible at the requested margin".

    ``objective`` optionally adds a linear tilt c^T x (a slot-indexed dict)
    to the minimized t; used by synthesis retries to sample different
    feasible points.  A tilted solve still reports Feasible only on the
    strength of its witness.
    """
    if not blocks:
        raise InputError("no LMI blocks given")
    if feas_margin <= 0 or box_bound <= 0:
        raise InputError("feas_margin and box_bound must be positive")
    nx = registry.num_slots
    for b in blocks:
        if not np.all(np.isfinite(b.F0)) or any(not np.all(np.isfinite(M)) for _, M in b.terms):
            raise InputError(f"non-finite coefficients in block {b.label!r}")
        for s, _ in b.terms:
            if not 0 <= s < nx:
                raise InputError(f"block {b.label!r} references unknown slot {s}")

    tilt = np.zeros(nx + 1)
    tilt[-1] = 1.0
    if objective:
        for s, c in objective.items():
            tilt[s] += c

    barrier = _Barrier(blocks, nx, box_bound)
    z = np.zeros(nx + 1)
    z[-1] = max(float(np.linalg.eigvalsh(b.F0)[-1]) for b in blocks) + 1.0
    factors = barrier.slacks(z)
    assert factors is not None  # t was chosen strictly above every lambda_max

    trace = [] if debug_trace is not None else None
    eta = 1.0
    steps = 0
    best_lower = -np.inf
    untilted = not objective
    consecutive_stalls = 0

    def classify(zc, lower):
        x = zc[:-1]
        margins = tuple(float(np.linalg.eigvalsh(b.evaluate(x))[-1]) for b in blocks)
        t = max(margins)  # effective achieved epigraph value at the witness
        if t <= -feas_margin:
            return "Feasible", margins, t
        if lower > -feas_margin:
            return "Infeasible", margins, t
        return "NumericalFailure", margins, t

    while True:
        # Center (approximately) for the current eta.  The per-round cap
        # keeps a single hard centering problem (tilted objectives converge
        # slowly) from exhausting the whole step budget at one eta.
        stalled = False
        last_decrement2 = np.inf
        round_steps = 0
        while steps < max_newton and round_steps < 100:
            round_steps += 1
            g, H = barrier.grad_hess(z, factors)
            g = g + eta * tilt
            Hr = H + np.eye(nx + 1) * (1e-14 * max(np.trace(H) / (nx + 1), 1.0))
            try:
                step = -np.linalg.solve(Hr, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(Hr, g, rcond=None)[0]
            decrement2 = float(-g @ step)
            steps += 1
            if decrement2 <= 0:
                break
            # Backtracking line search: stay interior, Armijo decrease.
            base = eta * float(tilt @ z) + barrier.value(z, factors)
            size = 1.0
            for _ in range(60):
                z_new = z + size * step
                f_new = barrier.slacks(z_new)
                if f_new is not None:
                    val = eta * float(tilt @ z_new) + barrier.value(z_new, f_new)
                    if val <= base - 0.01 * size * decrement2:
                        break
                size *= 0.5
            else:
                z_new, f_new = z, factors
                size = 0.0
            z, factors = z_new, f_new
            last_decrement2 = decrement2
            if trace is not None:
                trace.append({"eta": eta, "t": float(z[-1]),
                              "decrement2": decrement2, "step_size": size})
            if size < 1e-12:
                stalled = True  # at numerical precision for this eta
                break
            if decrement2 < CENTERING_TOL:
                break

        best_lower = max(best_lower, barrier.dual_lower_bound(factors, tilt[:-1]))
        if last_decrement2 <= 1e-2:
            # Near-centered iterate (Newton decrement <= 0.1): the
            # path-following duality measure bounds the optimality gap; the
            # factor 2 absorbs the centering error.  The fully homogeneous
            # problems this toolkit produces are only ever weakly infeasible
            # (F(0) = 0), so no strict Farkas certificate exists and this
            # central-path bound is what decides infeasibility in practice.
            best_lower = max(best_lower, float(z[-1]) - 2.0 * barrier.nu / eta)
        consecutive_stalls = consecutive_stalls + 1 if stalled else 0
        status, margins, t = classify(z, best_lower)
        if untilted and status != "NumericalFailure":
            break
        if steps >= max_newton or consecutive_stalls >= 3 \
                or barrier.nu / eta <= DUALITY_TOL:
            break
        eta *= 10.0

    lower = best_lower
    if objective:
        # A tilt invalidates the epigraph lower bound as an infeasibility
        # certificate; only the witness-based verdict stands.
        if status == "Infeasible":
            status = "NumericalFailure"
    sol = LmiSolution(
        status=status,
        assignment=z[:-1].copy() if status == "Feasible" else None,
        witness=z[:-1].copy(),
        margins=margins,
        t=float(t),
        lower_bound=float(lower),
        newton_steps=steps,
        feas_margin=feas_margin,
        box_bound=box_bound,
        block_labels=tuple(b.label for b in blocks),
    )
    if debug_trace is not None:
        doc = {"blocks": [{"label": b.label, "dim": b.dim, "num_terms": len(b.terms)}
                          for b in blocks],
               "iterates": trace, "result": sol.to_dict()}
        with open(debug_trace, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    return sol
