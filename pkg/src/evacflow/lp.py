"""Linear programming and branch-and-bound behind one solver contract.

Two interchangeable backends sit behind ``solve_lp`` / ``solve_mip``:

* The in-house core — a bounded-variable revised simplex with a dense basis
  inverse (Dantzig pricing, Bland's-rule fallback after a run of 1000
  degenerate pivots, two-phase start with per-row artificials, periodic
  refactorisation) under a depth-first branch and bound that branches on the
  most fractional integer variable (ties to the lowest variable id) and dives
  toward the nearest integer first.  Warm starts carry a basis and an
  incumbent from a solved model into an extension of it (extra columns and/or
  rows).  This backend is the reference implementation and the test oracle.

* SciPy's HiGHS interface (``linprog`` / ``milp``), used automatically once a
  model outgrows what a dense basis inverse handles comfortably.  HiGHS has
  no basis hand-off, but a warm incumbent is still honoured: it is checked
  for feasibility and the better of it and HiGHS's answer is returned, so
  warm-started re-solves never regress.

Everything is deterministic: identical models produce identical solutions
bit for bit on either backend.  ``backend="dense"`` forces the in-house core
(its row cap guards the basis inverse from absurd allocations);
``backend="highs"`` forces SciPy; the default ``"auto"`` picks by size.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

EPS_FEAS = 1e-6
EPS_OPT = 1e-6
EPS_INT = 1e-5
DEFAULT_GAP = 1e-4

_PIV_TOL = 1e-9
_DEGEN_RUN = 1000
_REFACTOR_EVERY = 128
DEFAULT_ROW_CAP = 6000

# beyond either limit "auto" hands the model to HiGHS
DENSE_ROW_LIMIT = 150
DENSE_VAR_LIMIT = 400

_AT_LB, _AT_UB, _BASIC, _FREE = 0, 1, 2, 3


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT = "TimeLimit"
    ITERATION_LIMIT = "IterationLimit"


class EngineCapacityError(RuntimeError):
    """Model exceeds what the dense engine can factorise."""


@dataclass
class SolveBudget:
    time_limit: float | None = None      # wall-clock seconds
    gap: float = DEFAULT_GAP             # relative MIP gap target
    node_limit: int | None = None
    iteration_limit: int | None = None


class LpModel:
    """Column/row container.  Coefficients are stored sparsely per row."""

    def __init__(self, sense: str = "min", name: str = "") -> None:
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.name = name
        self.obj: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.is_int: list[bool] = []
        self.var_names: list[str] = []
        self.rows: list[tuple[list[tuple[int, float]], str, float]] = []
        self.row_names: list[str] = []
        self._warm_basis: np.ndarray | None = None   # statuses, struct + slacks
        self._warm_split: tuple[int, int] | None = None  # (structs, rows) covered
        self._warm_x: np.ndarray | None = None       # candidate incumbent (MIP)

    # -- construction --------------------------------------------------------

    def add_var(self, lb: float = 0.0, ub: float = math.inf, obj: float = 0.0,
                integer: bool = False, name: str | None = None) -> int:
        if lb > ub:
            raise ValueError(f"variable bound crossover: lb={lb} > ub={ub}")
        self.obj.append(float(obj))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.is_int.append(bool(integer))
        self.var_names.append(name or f"x{len(self.obj) - 1}")
        return len(self.obj) - 1

    def add_constr(self, coeffs: list[tuple[int, float]], sense: str, rhs: float,
                   name: str | None = None) -> int:
        if sense not in ("<=", ">=", "="):
            raise ValueError(f"row sense must be <=, >= or =, got {sense!r}")
        for j, _ in coeffs:
            if not (0 <= j < len(self.obj)):
                raise ValueError(f"row references unknown variable {j}")
        self.rows.append(([(j, float(c)) for j, c in coeffs if c], sense, float(rhs)))
        self.row_names.append(name or f"r{len(self.rows) - 1}")
        return len(self.rows) - 1

    def add_term_to_row(self, row: int, var: int, coeff: float) -> None:
        """Append one coefficient to an existing row (incremental growth)."""
        if not (0 <= row < len(self.rows)):
            raise ValueError(f"unknown row {row}")
        if not (0 <= var < len(self.obj)):
            raise ValueError(f"row references unknown variable {var}")
        if coeff:
            self.rows[row][0].append((var, float(coeff)))

    @property
    def num_vars(self) -> int:
        return len(self.obj)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def has_integers(self) -> bool:
        return any(self.is_int)


@dataclass
class LpSolution:
    status: SolveStatus
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None          # one per row, original sense
    reduced_costs: np.ndarray | None = None  # one per structural var
    iterations: int = 0
    nodes: int = 0                           # branch-and-bound nodes evaluated
    bound: float | None = None               # best proven bound (MIP)
    gap: float | None = None                 # relative gap (MIP)
    basis: np.ndarray | None = None          # statuses, struct + slacks
    var_names: tuple[str, ...] = ()
    message: str = ""

    def dual_objective(self) -> float | None:
        """yᵀb plus reduced-cost terms at active bounds (strong-duality check)."""
        return self._dual_obj

    _dual_obj: float | None = None


def warm_start(model: LpModel, solution: LpSolution) -> LpModel:
    """Attach a previous solution's basis/incumbent to an extension of its model.

    The solved model's variables must be an exact prefix of ``model``'s
    (checked by name); otherwise the start is rejected.
    """
    k = len(solution.var_names)
    if k > model.num_vars or tuple(model.var_names[:k]) != solution.var_names:
        raise ValueError("warm start rejected: variable set does not extend the "
                         "solved model")
    if solution.x is None:
        return model
    if solution.basis is not None:
        model._warm_basis = solution.basis.copy()
        model._warm_split = (k, len(solution.basis) - k)
    pad = np.empty(model.num_vars - k)
    for i, j in enumerate(range(k, model.num_vars)):
        v = model.lb[j]
        if not math.isfinite(v):
            v = min(max(0.0, model.lb[j]), model.ub[j])
        pad[i] = v
    model._warm_x = np.concatenate(
        [np.asarray(solution.x, dtype=float), pad])
    return model


# -- the simplex core ---------------------------------------------------------


class _Simplex:
    """One solve of the extended problem min c·x, A x + s = b, bounds."""

    def __init__(self, model: LpModel, lo_override: np.ndarray | None = None,
                 hi_override: np.ndarray | None = None,
                 row_cap: int = DEFAULT_ROW_CAP) -> None:
        n, m = model.num_vars, model.num_rows
        if m > row_cap:
            raise EngineCapacityError(
                f"model has {m} rows; dense engine cap is {row_cap}")
        self.model = model
        self.n = n
        self.m = m
        self.N = n + 2 * m   # structurals, slacks, artificials
        sgn = 1.0 if model.sense == "min" else -1.0
        self.sgn = sgn
        self.c2 = np.zeros(self.N)
        self.c2[:n] = sgn * np.asarray(model.obj)
        self.lo = np.empty(self.N)
        self.hi = np.empty(self.N)
        self.lo[:n] = lo_override if lo_override is not None else model.lb
        self.hi[:n] = hi_override if hi_override is not None else model.ub
        self.b = np.empty(m)
        rows_i: list[int] = []
        cols_i: list[int] = []
        vals: list[float] = []
        for i, (coeffs, sense, rhs) in enumerate(model.rows):
            self.b[i] = rhs
            for j, cf in coeffs:
                rows_i.append(i)
                cols_i.append(j)
                vals.append(cf)
            rows_i.append(i)
            cols_i.append(n + i)       # slack
            vals.append(1.0)
            rows_i.append(i)
            cols_i.append(n + m + i)   # artificial
            vals.append(1.0)
            if sense == "<=":
                self.lo[n + i], self.hi[n + i] = 0.0, math.inf
            elif sense == ">=":
                self.lo[n + i], self.hi[n + i] = -math.inf, 0.0
            else:
                self.lo[n + i], self.hi[n + i] = 0.0, 0.0
            self.lo[n + m + i] = self.hi[n + m + i] = 0.0   # opened on demand
        self.A = sparse.csc_matrix(
            (vals, (rows_i, cols_i)), shape=(m, self.N))
        self.AT = self.A.T.tocsr()
        self.x = np.zeros(self.N)
        self.status = np.full(self.N, _AT_LB, dtype=np.int8)
        self.basis = np.zeros(0, dtype=np.int64)
        self.Binv = np.zeros((m, m))
        self.iterations = 0
        self._degen_run = 0
        self._bland = False

    # -- initial point -------------------------------------------------------

    def _nonbasic_start_value(self, j: int) -> tuple[float, int]:
        if self.lo[j] > -math.inf:
            return self.lo[j], _AT_LB
        if self.hi[j] < math.inf:
            return self.hi[j], _AT_UB
        return 0.0, _FREE

    def _cold_start(self) -> np.ndarray:
        """All-slack start; returns phase-1 costs (zero when already feasible)."""
        n, m = self.n, self.m
        for j in range(n):
            self.x[j], self.status[j] = self._nonbasic_start_value(j)
        self.x[n:] = 0.0
        self.status[n:] = _AT_LB
        r = self.b - self.A @ self.x
        c1 = np.zeros(self.N)
        basis = np.empty(m, dtype=np.int64)
        for i in range(m):
            s = n + i
            if self.lo[s] - 1e-12 <= r[i] <= self.hi[s] + 1e-12:
                basis[i] = s
                self.x[s] = r[i]
                self.status[s] = _BASIC
            else:
                sbar = min(max(r[i], self.lo[s]), self.hi[s])
                self.x[s] = sbar
                self.status[s] = _AT_LB if sbar == self.lo[s] else _AT_UB
                rho = r[i] - sbar
                a = n + m + i
                self.lo[a], self.hi[a] = min(rho, 0.0), max(rho, 0.0)
                self.x[a] = rho
                self.status[a] = _BASIC
                basis[i] = a
                c1[a] = 1.0 if rho > 0 else -1.0
        self.basis = basis
        self.Binv = np.eye(m)
        return c1

    def _try_warm_start(self) -> bool:
        wb = self.model._warm_basis
        split = self.model._warm_split
        if wb is None or split is None:
            return False
        n, m = self.n, self.m
        status = np.full(self.N, _AT_LB, dtype=np.int8)
        k_s, k_r = split   # statuses cover struct[0:k_s] then slacks[0:k_r]
        if k_s > n or k_r > m or k_s + k_r != len(wb):
            return False
        status[:k_s] = wb[:k_s]
        for j in range(k_s, n):
            _, st = self._nonbasic_start_value(j)
            status[j] = st
        status[n:n + k_r] = wb[k_s:]
        status[n + k_r:n + m] = _BASIC          # new rows: slack basic
        status[n + m:] = _AT_LB                 # artificials shut
        basis = np.flatnonzero(status == _BASIC)
        if len(basis) != m:
            return False
        B = self.A[:, basis].toarray()
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        x = np.zeros(self.N)
        for j in np.flatnonzero(status != _BASIC):
            if status[j] == _AT_LB:
                x[j] = self.lo[j]
            elif status[j] == _AT_UB:
                x[j] = self.hi[j]
        rhs = self.b - self.A @ x
        xb = Binv @ rhs
        if (np.any(xb < self.lo[basis] - EPS_FEAS)
                or np.any(xb > self.hi[basis] + EPS_FEAS)):
            return False
        x[basis] = xb
        self.x = x
        self.status = status
        self.basis = basis.astype(np.int64)
        self.Binv = Binv
        return True

    # -- machinery -----------------------------------------------------------

    def _col(self, j: int) -> np.ndarray:
        """Column ``j`` of A as a dense vector (no sparse-slice overhead)."""
        out = np.zeros(self.m)
        s, e = self.A.indptr[j], self.A.indptr[j + 1]
        out[self.A.indices[s:e]] = self.A.data[s:e]
        return out

    def _refactor(self) -> None:
        if self.m == 0:
            return
        B = self.A[:, self.basis].toarray()
        self.Binv = np.linalg.inv(B)
        xx = self.x.copy()
        xx[self.basis] = 0.0
        rhs = self.b - self.A @ xx
        self.x[self.basis] = self.Binv @ rhs

    def _duals(self, c: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.zeros(0)
        return self.Binv.T @ c[self.basis]

    def _phase(self, c: np.ndarray, deadline: float | None,
               iter_cap: int, phase1: bool) -> SolveStatus:
        span_ok = (self.hi - self.lo) > _PIV_TOL
        since_refactor = 0
        while True:
            if self.iterations >= iter_cap:
                return SolveStatus.ITERATION_LIMIT
            if deadline is not None and (self.iterations & 63) == 0:
                if time.monotonic() > deadline:
                    return SolveStatus.TIME_LIMIT
            y = self._duals(c)
            d = c - self.AT @ y
            st = self.status
            down = ((st == _AT_LB) | (st == _FREE)) & span_ok & (d < -EPS_OPT * 0.1)
            up = ((st == _AT_UB) | (st == _FREE)) & span_ok & (d > EPS_OPT * 0.1)
            if not down.any() and not up.any():
                return SolveStatus.OPTIMAL
            if self._bland:
                cand = np.flatnonzero(down | up)
                j = int(cand[0])
            else:
                score = np.where(down, -d, 0.0) + np.where(up, d, 0.0)
                j = int(np.argmax(score))
            sigma = 1.0 if down[j] else -1.0

            w = self.Binv @ self._col(j) if self.m else np.zeros(0)
            weff = sigma * w
            xb = self.x[self.basis]
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            ratios = np.full(self.m, math.inf)
            dec = weff > _PIV_TOL
            inc = weff < -_PIV_TOL
            with np.errstate(invalid="ignore"):
                ratios[dec] = (xb[dec] - lo_b[dec]) / weff[dec]
                ratios[inc] = (hi_b[inc] - xb[inc]) / (-weff[inc])
            ratios[ratios < 0] = 0.0   # numerical drift guard
            t_own = self.hi[j] - self.lo[j]
            t_basic = ratios.min() if self.m else math.inf
            t = min(t_own, t_basic)
            if math.isinf(t):
                return SolveStatus.UNBOUNDED
            if t_own <= t_basic + 1e-12 and not math.isinf(t_own):
                # bound flip, no basis change
                self.x[self.basis] = xb - sigma * t_own * w
                self.x[j] = self.hi[j] if self.status[j] == _AT_LB else self.lo[j]
                self.status[j] = _AT_UB if self.status[j] == _AT_LB else _AT_LB
                step = t_own
            else:
                tie = np.flatnonzero(ratios <= t_basic + 1e-12)
                r = int(tie[np.argmin(self.basis[tie])])
                leaving = int(self.basis[r])
                self.x[self.basis] = xb - sigma * t_basic * w
                self.x[j] = self.x[j] + sigma * t_basic
                if weff[r] > 0:
                    self.x[leaving] = self.lo[leaving]
                    self.status[leaving] = _AT_LB
                else:
                    self.x[leaving] = self.hi[leaving]
                    self.status[leaving] = _AT_UB
                self.status[j] = _BASIC
                self.basis[r] = j
                piv = w[r]
                self.Binv[r, :] /= piv
                wk = w.copy()
                wk[r] = 0.0
                self.Binv -= np.outer(wk, self.Binv[r, :])
                step = t_basic
                since_refactor += 1
                if since_refactor >= _REFACTOR_EVERY:
                    self._refactor()
                    since_refactor = 0
            self.iterations += 1
            if step <= 1e-9:
                self._degen_run += 1
                if self._degen_run > _DEGEN_RUN:
                    self._bland = True
            else:
                self._degen_run = 0
                self._bland = False

    def _drive_out_artificials(self) -> None:
        n, m = self.n, self.m
        for r in range(m):
            if self.basis[r] < n + m:
                continue
            # one sparse pass gives the pivot row over all real columns
            pivot_row = self.A[:, :n + m].T @ self.Binv[r, :]
            cands = np.flatnonzero((np.abs(pivot_row) > 1e-7)
                                   & (self.status[:n + m] != _BASIC))
            if len(cands) == 0:
                continue   # redundant row; artificial stays pinned at zero
            j = int(cands[0])
            leaving = int(self.basis[r])
            w = self.Binv @ self._col(j)
            self.basis[r] = j
            self.status[j] = _BASIC
            self.status[leaving] = _AT_LB
            self.x[leaving] = 0.0
            self.Binv[r, :] /= w[r]
            wk = w.copy()
            wk[r] = 0.0
            self.Binv -= np.outer(wk, self.Binv[r, :])
        self._refactor()

    def solve(self, deadline: float | None, iter_cap: int) -> LpSolution:
        model = self.model
        n, m = self.n, self.m
        warm_ok = False
        if model._warm_basis is not None:
            warm_ok = self._try_warm_start()
        c1 = None
        if not warm_ok:
            c1 = self._cold_start()
        if c1 is not None and np.any(c1):
            st = self._phase(c1, deadline, iter_cap, phase1=True)
            if st is not SolveStatus.OPTIMAL:
                return LpSolution(status=st, iterations=self.iterations,
                                  var_names=tuple(model.var_names),
                                  message="stopped during phase 1")
            infeas = float(c1 @ self.x)
            if infeas > EPS_FEAS:
                return LpSolution(status=SolveStatus.INFEASIBLE,
                                  iterations=self.iterations,
                                  var_names=tuple(model.var_names),
                                  message=f"phase-1 residual {infeas:.3e}")
            self.lo[n + m:] = 0.0
            self.hi[n + m:] = 0.0
            self.x[n + m:] = 0.0
            self._drive_out_artificials()
        st = self._phase(self.c2, deadline, iter_cap, phase1=False)
        if st is SolveStatus.UNBOUNDED:
            return LpSolution(status=SolveStatus.UNBOUNDED,
                              iterations=self.iterations,
                              var_names=tuple(model.var_names))
        if st is not SolveStatus.OPTIMAL:
            return LpSolution(status=st, iterations=self.iterations,
                              var_names=tuple(model.var_names),
                              message="stopped during phase 2")
        self._refactor()
        y2 = self._duals(self.c2)
        d2 = self.c2 - self.AT @ y2
        obj = float(self.c2[:n] @ self.x[:n]) * self.sgn
        duals = y2 * self.sgn
        red = d2[:n] * self.sgn
        nonbasic = self.status != _BASIC
        xb_terms = np.where(np.isfinite(self.x), self.x, 0.0)
        dual_obj = float(y2 @ self.b + d2[nonbasic] @ xb_terms[nonbasic]) * self.sgn
        sol = LpSolution(
            status=SolveStatus.OPTIMAL,
            x=self.x[:n].copy(),
            objective=obj,
            duals=duals,
            reduced_costs=red,
            iterations=self.iterations,
            basis=self.status[:n + m].copy(),
            var_names=tuple(model.var_names),
        )
        sol._dual_obj = dual_obj
        return sol


def _pick_backend(model: LpModel, backend: str) -> str:
    if backend not in ("auto", "dense", "highs"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend != "auto":
        return backend
    if model.num_rows > DENSE_ROW_LIMIT or model.num_vars > DENSE_VAR_LIMIT:
        return "highs"
    return "dense"


_LINPROG_STATUS = {1: SolveStatus.ITERATION_LIMIT, 2: SolveStatus.INFEASIBLE,
                   3: SolveStatus.UNBOUNDED, 4: SolveStatus.ITERATION_LIMIT}


def _solve_lp_highs(model: LpModel, lo, hi, *, time_limit: float | None,
                    iteration_limit: int | None) -> LpSolution:
    """LP relaxation via HiGHS, duals mapped back to the model's row senses."""
    n, m = model.num_vars, model.num_rows
    smin = 1.0 if model.sense == "min" else -1.0
    c = smin * np.asarray(model.obj, dtype=float)
    lo = np.asarray(model.lb if lo is None else lo, dtype=float)
    hi = np.asarray(model.ub if hi is None else hi, dtype=float)
    ub_rows: list[int] = []
    eq_rows: list[int] = []
    tri_ub: tuple[list, list, list] = ([], [], [])
    tri_eq: tuple[list, list, list] = ([], [], [])
    b_ub: list[float] = []
    b_eq: list[float] = []
    for i, (coeffs, sense, rhs) in enumerate(model.rows):
        flip = -1.0 if sense == ">=" else 1.0
        tri, b, idx = (tri_eq, b_eq, eq_rows) if sense == "=" \
            else (tri_ub, b_ub, ub_rows)
        for j, cf in coeffs:
            tri[0].append(len(b))
            tri[1].append(j)
            tri[2].append(flip * cf)
        b.append(flip * rhs)
        idx.append(i)
    A_ub = sparse.csr_matrix((tri_ub[2], (tri_ub[0], tri_ub[1])),
                             shape=(len(b_ub), n)) if b_ub else None
    A_eq = sparse.csr_matrix((tri_eq[2], (tri_eq[0], tri_eq[1])),
                             shape=(len(b_eq), n)) if b_eq else None
    options: dict = {}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    if iteration_limit is not None:
        options["maxiter"] = int(iteration_limit)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub or None, A_eq=A_eq,
                  b_eq=b_eq or None, bounds=np.column_stack([lo, hi]),
                  method="highs", options=options)
    if res.status == 2:
        # HiGHS presolve occasionally misreports tight models as infeasible;
        # a presolve-free solve settles it
        res = linprog(c, A_ub=A_ub, b_ub=b_ub or None, A_eq=A_eq,
                      b_eq=b_eq or None, bounds=np.column_stack([lo, hi]),
                      method="highs", options={**options, "presolve": False})
    names = tuple(model.var_names)
    if res.status != 0:
        st = _LINPROG_STATUS.get(res.status, SolveStatus.ITERATION_LIMIT)
        if st is SolveStatus.ITERATION_LIMIT and time_limit is not None \
                and iteration_limit is None:
            st = SolveStatus.TIME_LIMIT
        return LpSolution(status=st, iterations=int(res.nit or 0),
                          var_names=names, message=str(res.message))
    x = np.minimum(np.maximum(np.asarray(res.x, dtype=float), lo), hi)
    duals = np.zeros(m)
    red = np.zeros(n)
    dual_obj = None
    if res.ineqlin is not None and len(ub_rows):
        flips = np.array([-1.0 if model.rows[i][1] == ">=" else 1.0
                          for i in ub_rows])
        duals[ub_rows] = smin * flips * np.asarray(res.ineqlin.marginals)
    if res.eqlin is not None and len(eq_rows):
        duals[eq_rows] = smin * np.asarray(res.eqlin.marginals)
    if res.lower is not None and res.upper is not None:
        zl = np.asarray(res.lower.marginals)
        zu = np.asarray(res.upper.marginals)
        red = smin * (zl + zu)
        rhs_all = np.array([r for _, _, r in model.rows])
        bt = zl * np.where(np.isfinite(lo), lo, 0.0) \
            + zu * np.where(np.isfinite(hi), hi, 0.0)
        dual_obj = smin * (float(smin * duals @ rhs_all) + float(bt.sum()))
    sol = LpSolution(status=SolveStatus.OPTIMAL, x=x,
                     objective=float(np.asarray(model.obj) @ x),
                     duals=duals, reduced_costs=red,
                     iterations=int(res.nit or 0), var_names=names)
    sol._dual_obj = dual_obj
    return sol


def _warm_incumbent(model: LpModel) -> tuple[np.ndarray, float] | None:
    """Feasibility-checked injected incumbent and its model-sense value."""
    warm = model._warm_x
    if warm is None or len(warm) != model.num_vars:
        return None
    ok, fixed = _check_feasible(model, warm)
    if not ok:
        return None
    return fixed, float(np.asarray(model.obj) @ fixed)


def _polish_round(model: LpModel, cand: np.ndarray,
                  time_limit: float | None) -> np.ndarray | None:
    """Repair a near-integral point whose rounding noise trips a big-M row:
    pin the integers at their rounded values and re-solve the continuous
    rest, which lands exactly on a feasible vertex (or proves the rounding
    wrong)."""
    idx = np.flatnonzero(np.asarray(model.is_int))
    lo = np.asarray(model.lb, dtype=float).copy()
    hi = np.asarray(model.ub, dtype=float).copy()
    pinned = np.minimum(np.maximum(np.round(cand[idx]), lo[idx]), hi[idx])
    lo[idx] = pinned
    hi[idx] = pinned
    sol = _solve_lp_highs(model, lo, hi, time_limit=time_limit,
                          iteration_limit=None)
    if sol.status is not SolveStatus.OPTIMAL or sol.x is None:
        return None
    ok, fixed = _check_feasible(model, sol.x)
    return fixed if ok else None


def _solve_mip_highs(model: LpModel, budget: SolveBudget) -> LpSolution:
    """MIP via HiGHS branch and cut; never returns worse than a warm point."""
    n, m = model.num_vars, model.num_rows
    smin = 1.0 if model.sense == "min" else -1.0
    sgn = -smin   # map objectives into "higher is better" space
    c = smin * np.asarray(model.obj, dtype=float)
    lo = np.asarray(model.lb, dtype=float)
    hi = np.asarray(model.ub, dtype=float)
    rows_i: list[int] = []
    cols_i: list[int] = []
    vals: list[float] = []
    rlo = np.empty(m)
    rhi = np.empty(m)
    for i, (coeffs, sense, rhs) in enumerate(model.rows):
        for j, cf in coeffs:
            rows_i.append(i)
            cols_i.append(j)
            vals.append(cf)
        rlo[i] = -math.inf if sense == "<=" else rhs
        rhi[i] = math.inf if sense == ">=" else rhs
    constraints = []
    if m:
        A = sparse.csr_matrix((vals, (rows_i, cols_i)), shape=(m, n))
        constraints = [LinearConstraint(A, rlo, rhi)]
    options: dict = {"mip_rel_gap": budget.gap}
    if budget.time_limit is not None:
        options["time_limit"] = float(budget.time_limit)
    if budget.node_limit is not None:
        options["node_limit"] = int(budget.node_limit)
    res = milp(c=c, constraints=constraints,
               integrality=np.asarray(model.is_int, dtype=np.uint8),
               bounds=Bounds(lo, hi), options=options)
    if res.status in (2, 4) and res.x is None:
        # HiGHS presolve occasionally misreports tight models as infeasible;
        # a presolve-free solve settles it
        res = milp(c=c, constraints=constraints,
                   integrality=np.asarray(model.is_int, dtype=np.uint8),
                   bounds=Bounds(lo, hi),
                   options={**options, "presolve": False})
    names = tuple(model.var_names)
    warm = _warm_incumbent(model)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    status = {0: SolveStatus.OPTIMAL, 2: SolveStatus.INFEASIBLE,
              3: SolveStatus.UNBOUNDED}.get(
        res.status,
        SolveStatus.TIME_LIMIT if budget.time_limit is not None
        else SolveStatus.ITERATION_LIMIT)
    if res.status == 4 and res.x is None and "unbounded" in str(res.message):
        # presolve could not tell unbounded from infeasible; the relaxation can
        relax = _solve_lp_highs(model, None, None,
                                time_limit=budget.time_limit,
                                iteration_limit=None)
        if relax.status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
            status = relax.status

    x = obj = None
    if res.x is not None:
        cand = np.minimum(np.maximum(np.asarray(res.x, dtype=float), lo), hi)
        ok, fixed = _check_feasible(model, cand)
        if not ok:
            fixed = _polish_round(model, cand, budget.time_limit)
            ok = fixed is not None
        if ok:
            x = fixed
            obj = float(np.asarray(model.obj) @ fixed)
        elif status is SolveStatus.OPTIMAL:
            status = SolveStatus.ITERATION_LIMIT   # point failed our tolerance
    if warm is not None and (obj is None or sgn * warm[1] > sgn * obj + 1e-9):
        x, obj = warm
        if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
            status = SolveStatus.ITERATION_LIMIT
    if x is None:
        return LpSolution(status=status, nodes=nodes, var_names=names,
                          message=str(res.message))

    bound = getattr(res, "mip_dual_bound", None)
    if bound is not None and math.isfinite(bound):
        bound = smin * float(bound)
        if sgn * bound < sgn * obj:     # a proven incumbent beats the bound
            bound = obj
    elif status is SolveStatus.OPTIMAL:
        bound = obj
    else:
        bound = None
    gap = None if bound is None \
        else max(sgn * (bound - obj), 0.0) / max(1.0, abs(obj))
    return LpSolution(status=status, x=x, objective=obj, nodes=nodes,
                      bound=bound, gap=gap, var_names=names,
                      message=str(res.message))


def solve_lp(model: LpModel, *, time_limit: float | None = None,
             iteration_limit: int | None = None,
             row_cap: int = DEFAULT_ROW_CAP, backend: str = "auto",
             _bounds: tuple[np.ndarray, np.ndarray] | None = None) -> LpSolution:
    """Solve the continuous relaxation of ``model``."""
    deadline = None if time_limit is None else time.monotonic() + time_limit
    if time_limit is not None and time_limit <= 0:
        return LpSolution(status=SolveStatus.TIME_LIMIT,
                          var_names=tuple(model.var_names),
                          message="time limit exhausted before solving")
    lo = hi = None
    if _bounds is not None:
        lo, hi = _bounds
    if _pick_backend(model, backend) == "highs":
        return _solve_lp_highs(model, lo, hi, time_limit=time_limit,
                               iteration_limit=iteration_limit)
    cap = iteration_limit if iteration_limit is not None else \
        max(50_000, 40 * (model.num_vars + model.num_rows))
    sx = _Simplex(model, lo, hi, row_cap=row_cap)
    return sx.solve(deadline, cap)


def solve_mip(model: LpModel, budget: SolveBudget | None = None, *,
              row_cap: int = DEFAULT_ROW_CAP,
              backend: str = "auto") -> LpSolution:
    """Branch and bound over ``model``'s integer variables.

    Returns the incumbent with a proven bound and relative gap; status
    TimeLimit/IterationLimit solutions keep the best incumbent found so far.
    """
    budget = budget or SolveBudget()
    t0 = time.monotonic()
    deadline = None if budget.time_limit is None else t0 + budget.time_limit
    if budget.time_limit is not None and budget.time_limit <= 0:
        return LpSolution(status=SolveStatus.TIME_LIMIT,
                          var_names=tuple(model.var_names),
                          message="time limit exhausted before solving")
    if not model.has_integers():
        return solve_lp(model, time_limit=budget.time_limit, row_cap=row_cap,
                        backend=backend)
    if _pick_backend(model, backend) == "highs":
        return _solve_mip_highs(model, budget)

    n = model.num_vars
    int_idx = np.flatnonzero(np.asarray(model.is_int))
    sgn = 1.0 if model.sense == "max" else -1.0   # "better" = higher sgn*val

    incumbent: np.ndarray | None = None
    inc_val = -math.inf   # in sgn-space
    inc_sol: LpSolution | None = None

    warm_x = model._warm_x
    if warm_x is not None and len(warm_x) == n:
        ok, fixed = _check_feasible(model, warm_x)
        if ok:
            incumbent = fixed
            inc_val = sgn * float(np.asarray(model.obj) @ fixed)

    lo0 = np.asarray(model.lb, dtype=float)
    hi0 = np.asarray(model.ub, dtype=float)
    root = (lo0, hi0, math.inf)   # bounds plus parent bound in sgn-space
    stack: list[tuple[np.ndarray, np.ndarray, float]] = [root]
    nodes = 0
    total_iters = 0
    status = SolveStatus.OPTIMAL
    saw_limit = None
    stop_bound: float | None = None   # bound frozen at an early gap stop

    while stack:
        if deadline is not None and time.monotonic() > deadline:
            saw_limit = SolveStatus.TIME_LIMIT
            break
        if budget.node_limit is not None and nodes >= budget.node_limit:
            saw_limit = SolveStatus.ITERATION_LIMIT
            break
        lo, hi, parent_bound = stack.pop()
        if parent_bound <= inc_val + 1e-9:
            continue
        nodes += 1
        tl = None if deadline is None else max(deadline - time.monotonic(), 0.01)
        res = solve_lp(model, time_limit=tl, row_cap=row_cap,
                       backend="dense", _bounds=(lo, hi))
        total_iters += res.iterations
        if res.status is SolveStatus.INFEASIBLE:
            continue
        if res.status is SolveStatus.UNBOUNDED:
            return LpSolution(status=SolveStatus.UNBOUNDED, nodes=nodes,
                              var_names=tuple(model.var_names))
        if res.status in (SolveStatus.TIME_LIMIT, SolveStatus.ITERATION_LIMIT):
            stack.append((lo, hi, parent_bound))   # keep it in the open bound
            saw_limit = res.status
            break
        val = sgn * res.objective
        if val <= inc_val + 1e-9:
            continue
        xv = res.x
        fracs = np.abs(xv[int_idx] - np.round(xv[int_idx]))
        viol = fracs > EPS_INT
        if not viol.any():
            fixed = xv.copy()
            fixed[int_idx] = np.round(fixed[int_idx])
            incumbent = fixed
            inc_val = val
            inc_sol = res
            continue
        # most fractional, ties to the lowest variable id
        dist = np.where(viol, np.minimum(fracs, 1.0 - fracs), -1.0)
        bpos = int(np.argmax(dist))
        bvar = int(int_idx[bpos])
        bval = float(xv[bvar])
        fl = math.floor(bval)
        lo_dn, hi_dn = lo.copy(), hi.copy()
        hi_dn[bvar] = fl
        lo_up, hi_up = lo.copy(), hi.copy()
        lo_up[bvar] = fl + 1
        # fractional variable bounds can make a child empty; never emit
        # crossed bounds (the LP layer would pin the variable outside them)
        down = (lo_dn, hi_dn, val) if lo_dn[bvar] <= hi_dn[bvar] else None
        up = (lo_up, hi_up, val) if lo_up[bvar] <= hi_up[bvar] else None
        order = (down, up) if bval - fl >= 0.5 else (up, down)
        for child in order:        # dive toward the nearest integer first
            if child is not None:
                stack.append(child)
        # opportunistic gap stop
        if incumbent is not None:
            gbound = max(max((pb for _, _, pb in stack), default=inc_val), inc_val)
            if gbound - inc_val <= budget.gap * max(1.0, abs(inc_val)):
                stop_bound = gbound
                stack.clear()
                break

    open_bound = max((pb for _, _, pb in stack), default=-math.inf)
    bound_sgnspace = max(open_bound, inc_val)
    if stop_bound is not None:
        bound_sgnspace = stop_bound
    if saw_limit is not None:
        status = saw_limit
    elif incumbent is None:
        return LpSolution(status=SolveStatus.INFEASIBLE, nodes=nodes,
                          var_names=tuple(model.var_names),
                          message="no integer-feasible point")
    if incumbent is None:
        return LpSolution(status=status, nodes=nodes,
                          var_names=tuple(model.var_names),
                          message="stopped before first incumbent")
    gap = (bound_sgnspace - inc_val) / max(1.0, abs(inc_val))
    out = LpSolution(
        status=status,
        x=incumbent,
        objective=sgn * inc_val,
        duals=None if inc_sol is None else inc_sol.duals,
        reduced_costs=None if inc_sol is None else inc_sol.reduced_costs,
        iterations=total_iters,
        nodes=nodes,
        bound=sgn * bound_sgnspace,
        gap=max(gap, 0.0),
        basis=None if inc_sol is None else inc_sol.basis,
        var_names=tuple(model.var_names),
    )
    return out


def _check_feasible(model: LpModel, x: np.ndarray) -> tuple[bool, np.ndarray]:
    """Validate a candidate point (used for injected incumbents)."""
    x = np.asarray(x, dtype=float).copy()
    idx = np.flatnonzero(np.asarray(model.is_int))
    if len(idx) and np.any(np.abs(x[idx] - np.round(x[idx])) > EPS_INT):
        return False, x
    x[idx] = np.round(x[idx])
    lo = np.asarray(model.lb)
    hi = np.asarray(model.ub)
    if np.any(x < lo - EPS_FEAS) or np.any(x > hi + EPS_FEAS):
        return False, x
    for coeffs, sense, rhs in model.rows:
        act = sum(cf * x[j] for j, cf in coeffs)
        if sense == "<=" and act > rhs + EPS_FEAS * max(1.0, abs(rhs)):
            return False, x
        if sense == ">=" and act < rhs - EPS_FEAS * max(1.0, abs(rhs)):
            return False, x
        if sense == "=" and abs(act - rhs) > EPS_FEAS * max(1.0, abs(rhs)):
            return False, x
    return True, x


# -- plain-text dump ----------------------------------------------------------

def write_lp_text(model: LpModel, path) -> None:
    """Dump the model in the familiar LP plain-text dialect.

    Subset emitted: objective, Subject To, Bounds, Generals, End. Variable
    and row names come from the model (default x<i>/r<i>).
    """
    def term(cf: float, name: str) -> str:
        s = "+" if cf >= 0 else "-"
        return f"{s} {abs(cf):.12g} {name}"

    lines = []
    lines.append("\\ " + (model.name or "model"))
    lines.append("Maximize" if model.sense == "max" else "Minimize")
    terms = [term(cf, model.var_names[j])
             for j, cf in enumerate(model.obj) if cf] or ["+ 0 " + model.var_names[0]]
    lines.append(" obj: " + " ".join(terms).lstrip("+ "))
    lines.append("Subject To")
    rel = {"<=": "<=", ">=": ">=", "=": "="}
    for i, (coeffs, sense, rhs) in enumerate(model.rows):
        body = " ".join(term(cf, model.var_names[j]) for j, cf in coeffs)
        lines.append(f" {model.row_names[i]}: {body.lstrip('+ ')} {rel[sense]} {rhs:.12g}")
    lines.append("Bounds")
    for j in range(model.num_vars):
        lb, ub = model.lb[j], model.ub[j]
        nm = model.var_names[j]
        if lb == -math.inf and ub == math.inf:
            lines.append(f" {nm} free")
        elif ub == math.inf:
            lines.append(f" {lb:.12g} <= {nm}")
        elif lb == -math.inf:
            lines.append(f" {nm} <= {ub:.12g}")
        else:
            lines.append(f" {lb:.12g} <= {nm} <= {ub:.12g}")
    gens = [model.var_names[j] for j in range(model.num_vars) if model.is_int[j]]
    if gens:
        lines.append("Generals")
        lines.append(" " + " ".join(gens))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        from pathlib import Path
        Path(path).write_text(text)
