"""First-order solvers for prior-anchored covariance estimation.

All problems minimize, over the open cone Q_S = {L : S^-1 + L > 0}, the
smooth dual functional

    J(L) = -log det(S^-1 + L) + tr(T_hat L)

plus a penalty that encodes the link-change hypothesis:

  * known    -- L constrained to a given support (appearing/disappearing
                edges known in advance); smooth projected gradient.
  * plp      -- l1 on off-diagonal entries outside the prior support,
                selecting appearing edges.
  * nlp      -- L supported on the prior support (hard constraint), with l1
                pulling each off-diagonal entry toward the negated prior
                precision entry, selecting disappearing edges.
  * mixed    -- both penalties with separate weights.

The solution covariance is recovered as T_o = (S^-1 + L)^-1.

Convention: the free variables are the stored lower-triangle entries.
Each off-diagonal variable appears twice in trace terms, so its effective
smooth gradient is 2 (T_hat - (S^-1+L)^-1)_ij while the penalty weighs it
once; the prox therefore uses threshold t*gamma and the gradient step uses
the doubled off-diagonal gradient. KKT checks must use this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .ggm import GaussianModel
from .symmat import SupportPattern, SymmetricMatrix, _tril_of, support_of

_STEP_FLOOR_FACTOR = 1e-18


@dataclass(frozen=True)
class PenaltySpec:
    """Tagged choice of constraint/penalty; exactly the active kind's
    parameters are set."""

    kind: str
    omega: SupportPattern | None = None
    gamma_p: float | None = None
    gamma_n: float | None = None
    eta_p: float | None = None
    eta_n: float | None = None

    _FIELDS = {
        "known": ("omega",),
        "plp": ("gamma_p",),
        "nlp": ("gamma_n",),
        "mixed": ("eta_p", "eta_n"),
    }

    def __post_init__(self):
        if self.kind not in self._FIELDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        active = self._FIELDS[self.kind]
        for name in ("omega", "gamma_p", "gamma_n", "eta_p", "eta_n"):
            value = getattr(self, name)
            if name in active:
                if value is None:
                    raise ValueError(f"penalty {self.kind!r} requires {name}")
                if name != "omega" and value <= 0:
                    raise ValueError(f"{name} must be strictly positive")
            elif value is not None:
                raise ValueError(f"penalty {self.kind!r} does not take {name}")

    @classmethod
    def known_support(cls, omega: SupportPattern) -> "PenaltySpec":
        return cls(kind="known", omega=omega)

    @classmethod
    def plp(cls, gamma_p: float) -> "PenaltySpec":
        return cls(kind="plp", gamma_p=gamma_p)

    @classmethod
    def nlp(cls, gamma_n: float) -> "PenaltySpec":
        return cls(kind="nlp", gamma_n=gamma_n)

    @classmethod
    def mixed(cls, eta_p: float, eta_n: float) -> "PenaltySpec":
        return cls(kind="mixed", eta_p=eta_p, eta_n=eta_n)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 50000
    grad_tol: float = 1e-7
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    armijo_const: float = 1e-4
    zero_tol: float = 1e-8
    feasibility_margin: float = 0.0
    divergence_bound: float = 1e10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol <= 0 or self.step_init <= 0:
            raise ValueError("grad_tol and step_init must be positive")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("backtrack_factor must be in (0, 1)")
        if not (0.0 < self.armijo_const < 1.0):
            raise ValueError("armijo_const must be in (0, 1)")
        if self.zero_tol < 0 or self.feasibility_margin < 0:
            raise ValueError("zero_tol and feasibility_margin must be >= 0")
        if self.divergence_bound <= 0:
            raise ValueError("divergence_bound must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown solver config fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass
class SolveResult:
    lambda_opt: SymmetricMatrix
    t_opt: SymmetricMatrix
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    duality_gap: float | None = None
    constraint_residual: float | None = None
    support_estimate_raw: SupportPattern | None = None

    def to_report(self) -> dict:
        """Scalar convergence data for the JSON report."""
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "objective_initial": self.objective_trace[0],
            "objective_final": self.objective_trace[-1],
            "duality_gap": self.duality_gap,
            "constraint_residual": self.constraint_residual,
            "support_estimate_raw": {
                "dim": self.support_estimate_raw.dim,
                "pairs": [list(p) for p in self.support_estimate_raw.pairs()],
            },
        }


# ---------------------------------------------------------------------------
# Smooth part
# ---------------------------------------------------------------------------

def _chol_or_none(arr: np.ndarray):
    # ValueError covers non-finite entries, which are never PD.
    try:
        return scipy.linalg.cholesky(arr, lower=True)
    except (scipy.linalg.LinAlgError, ValueError):
        return None


def _sym_inv_from_chol(factor: np.ndarray) -> np.ndarray:
    inv = scipy.linalg.cho_solve((factor, True), np.eye(factor.shape[0]))
    return np.tril(inv) + np.tril(inv, -1).T


def dual_smooth_value(lam: SymmetricMatrix, s_inv: SymmetricMatrix,
                      t_hat: SymmetricMatrix) -> float:
    """-log det(S^-1 + L) + tr(T_hat L); raises on infeasible L."""
    m_arr = s_inv.to_array() + lam.to_array()
    factor = _chol_or_none(m_arr)
    if factor is None:
        raise ValueError("infeasible multiplier: S^-1 + L is not positive definite")
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor))))
    return -logdet + float(np.sum(t_hat.to_array() * lam.to_array()))


def dual_smooth_gradient(lam: SymmetricMatrix, s_inv: SymmetricMatrix,
                         t_hat: SymmetricMatrix) -> SymmetricMatrix:
    """Matrix gradient T_hat - (S^-1 + L)^-1 (trace inner product)."""
    m_arr = s_inv.to_array() + lam.to_array()
    factor = _chol_or_none(m_arr)
    if factor is None:
        raise ValueError("infeasible multiplier: S^-1 + L is not positive definite")
    grad = t_hat.to_array() - _sym_inv_from_chol(factor)
    return SymmetricMatrix(lam.dim, _tril_of(grad))


def primal_from_dual(lam: SymmetricMatrix,
                     s_inv: SymmetricMatrix) -> SymmetricMatrix:
    """Recovered covariance (S^-1 + L)^-1; raises on infeasible L."""
    m_arr = s_inv.to_array() + lam.to_array()
    factor = _chol_or_none(m_arr)
    if factor is None:
        raise ValueError("infeasible multiplier: S^-1 + L is not positive definite")
    return SymmetricMatrix(lam.dim, _tril_of(_sym_inv_from_chol(factor)))


# ---------------------------------------------------------------------------
# Proximal maps
# ---------------------------------------------------------------------------

def _soft(v: np.ndarray, thr: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


class _Masks:
    """Boolean index sets for one penalty kind (0-based, symmetric).

    zero    -- entries hard-constrained to 0
    shrink  -- entries soft-thresholded toward 0
    shift   -- entries soft-thresholded toward the negated prior precision
    *_low   -- lower-triangle restriction, for penalty values counted once
    """

    def __init__(self, dim: int):
        self.zero = np.zeros((dim, dim), dtype=bool)
        self.shrink = np.zeros((dim, dim), dtype=bool)
        self.shift = np.zeros((dim, dim), dtype=bool)
        self._low = np.tril(np.ones((dim, dim), dtype=bool), -1)

    @property
    def shrink_low(self):
        return self.shrink & self._low

    @property
    def shift_low(self):
        return self.shift & self._low


def _build_masks(kind: str, dim: int, prior_mask, omega_mask=None) -> _Masks:
    masks = _Masks(dim)
    offdiag = ~np.eye(dim, dtype=bool)
    if kind == "known":
        masks.zero = ~omega_mask
    elif kind == "plp":
        masks.shrink = offdiag & ~prior_mask
    elif kind == "nlp":
        masks.zero = ~prior_mask
        masks.shift = offdiag & prior_mask
    elif kind == "mixed":
        masks.shrink = offdiag & ~prior_mask
        masks.shift = offdiag & prior_mask
    else:
        raise ValueError(f"unknown penalty kind {kind!r}")
    return masks


def _prox_arr(arr: np.ndarray, step: float, penalty: PenaltySpec,
              s_inv_arr: np.ndarray, masks: _Masks) -> np.ndarray:
    out = arr.copy()
    kind = penalty.kind
    if kind == "known":
        out[masks.zero] = 0.0
    elif kind == "plp":
        out[masks.shrink] = _soft(arr[masks.shrink], step * penalty.gamma_p)
    elif kind == "nlp":
        out[masks.zero] = 0.0
        s = s_inv_arr[masks.shift]
        out[masks.shift] = _soft(arr[masks.shift] + s, step * penalty.gamma_n) - s
    else:
        out[masks.shrink] = _soft(arr[masks.shrink], step * penalty.eta_p)
        s = s_inv_arr[masks.shift]
        out[masks.shift] = _soft(arr[masks.shift] + s, step * penalty.eta_n) - s
    return out


def _penalty_value(arr: np.ndarray, penalty: PenaltySpec,
                   s_inv_arr: np.ndarray, masks: _Masks) -> float:
    kind = penalty.kind
    if kind == "known":
        return 0.0
    if kind == "plp":
        return penalty.gamma_p * float(np.sum(np.abs(arr[masks.shrink_low])))
    if kind == "nlp":
        low = masks.shift_low
        return penalty.gamma_n * float(np.sum(np.abs(arr[low] + s_inv_arr[low])))
    low = masks.shift_low
    return (penalty.eta_p * float(np.sum(np.abs(arr[masks.shrink_low])))
            + penalty.eta_n * float(np.sum(np.abs(arr[low] + s_inv_arr[low]))))


def prox_plp(lam: SymmetricMatrix, step: float, gamma_p: float,
             prior_support: SupportPattern) -> SymmetricMatrix:
    """Soft-threshold off-diagonal entries outside the prior support by
    step*gamma_p; prior-support entries and the diagonal pass through."""
    if step <= 0:
        raise ValueError("step must be positive")
    masks = _build_masks("plp", lam.dim, prior_support.mask())
    out = _prox_arr(lam.to_array(), step, PenaltySpec.plp(gamma_p), None, masks)
    return SymmetricMatrix(lam.dim, _tril_of(out))


def prox_nlp(lam: SymmetricMatrix, step: float, gamma_n: float,
             s_inv: SymmetricMatrix,
             prior_support: SupportPattern) -> SymmetricMatrix:
    """Zero all entries outside the prior support (hard constraint) and
    soft-threshold off-diagonal entries inside it toward the negated prior
    precision entry, with threshold step*gamma_n; diagonal passes through."""
    if step <= 0:
        raise ValueError("step must be positive")
    masks = _build_masks("nlp", lam.dim, prior_support.mask())
    out = _prox_arr(lam.to_array(), step, PenaltySpec.nlp(gamma_n),
                    s_inv.to_array(), masks)
    return SymmetricMatrix(lam.dim, _tril_of(out))


def prox_mixed(lam: SymmetricMatrix, step: float, eta_p: float, eta_n: float,
               s_inv: SymmetricMatrix,
               prior_support: SupportPattern) -> SymmetricMatrix:
    """Combine both penalties: outside the prior support, soft-threshold by
    step*eta_p; inside (off-diagonal), shifted soft-threshold by step*eta_n;
    diagonal passes through."""
    if step <= 0:
        raise ValueError("step must be positive")
    masks = _build_masks("mixed", lam.dim, prior_support.mask())
    out = _prox_arr(lam.to_array(), step, PenaltySpec.mixed(eta_p, eta_n),
                    s_inv.to_array(), masks)
    return SymmetricMatrix(lam.dim, _tril_of(out))


# ---------------------------------------------------------------------------
# Main solver
# ---------------------------------------------------------------------------

def _packed_norm_sq(delta: np.ndarray) -> float:
    # Lower-triangle (free-variable) squared norm: off-diagonals once.
    return 0.5 * (float(np.sum(delta * delta))
                  + float(np.sum(np.diag(delta) ** 2)))


def random_feasible_start(s_inv: SymmetricMatrix, seed: int,
                          scale: float = 0.5,
                          support: SupportPattern | None = None) -> SymmetricMatrix:
    """Random symmetric multiplier, scaled into the feasible cone and then
    shrunk by ``scale`` so it sits strictly inside; optionally restricted to
    a support (restriction applied before the feasibility scaling)."""
    if not (0.0 < scale < 1.0):
        raise ValueError("scale must be in (0, 1)")
    dim = s_inv.dim
    rng = np.random.default_rng(seed)
    g = np.tril(rng.standard_normal((dim, dim)))
    g = g + np.tril(g, -1).T
    if support is not None:
        g = np.where(support.mask(), g, 0.0)
    s_arr = s_inv.to_array()
    alpha = 1.0
    for _ in range(200):
        if _chol_or_none(s_arr + alpha * g) is not None:
            # Convexity of the cone: scaling toward 0 stays strictly inside.
            return SymmetricMatrix(dim, _tril_of(scale * alpha * g))
        alpha *= 0.5
    raise RuntimeError("could not scale the random start into the feasible cone")


def solve(model: GaussianModel, t_hat: SymmetricMatrix, penalty: PenaltySpec,
          cfg: SolverConfig = SolverConfig(),
          lam0: SymmetricMatrix | None = None) -> SolveResult:
    """Proximal-gradient descent on the penalized dual functional.

    Backtracking rejects any candidate whose S^-1 + L fails the Cholesky
    feasibility test and otherwise enforces sufficient decrease of the
    composite objective. Terminates when the proximal-gradient residual
    (step-normalized move, lower-triangle norm) drops to cfg.grad_tol.
    Non-convergence is flagged, not raised.
    """
    dim = model.dim
    if t_hat.dim != dim:
        raise ValueError("sample covariance dimension does not match the model")
    s_inv_arr = model.precision.to_array()
    t_hat_arr = t_hat.to_array()
    prior_mask = model.precision_support.mask()
    omega_mask = penalty.omega.mask() if penalty.kind == "known" else None
    if penalty.kind == "known" and penalty.omega.dim != dim:
        raise ValueError("constraint support dimension does not match the model")
    masks = _build_masks(penalty.kind, dim, prior_mask, omega_mask)

    lam = np.zeros((dim, dim)) if lam0 is None else lam0.to_array()
    if lam0 is not None and penalty.kind in ("known", "nlp"):
        # Hard-constrained kinds start inside their subspace.
        lam[masks.zero] = 0.0

    margin = cfg.feasibility_margin
    eye = np.eye(dim)

    def chol_if_feasible(m_arr):
        f = _chol_or_none(m_arr)
        if f is not None and margin > 0:
            if _chol_or_none(m_arr - margin * eye) is None:
                return None
        return f

    def neg_logdet(chol_factor):
        return -2.0 * float(np.sum(np.log(np.diag(chol_factor))))

    m_arr = s_inv_arr + lam
    factor = chol_if_feasible(m_arr)
    if factor is None:
        raise ValueError("initial multiplier is infeasible")

    f_total = (neg_logdet(factor) + float(np.sum(t_hat_arr * lam))
               + _penalty_value(lam, penalty, s_inv_arr, masks))
    trace = [f_total]

    step = cfg.step_init
    step_floor = cfg.step_init * _STEP_FLOOR_FACTOR
    converged = False
    iterations = 0

    def free_gradient(chol_factor):
        # Free-variable gradient: doubled off-diagonals, plain diagonal.
        grad = t_hat_arr - _sym_inv_from_chol(chol_factor)
        return 2.0 * grad - np.diag(np.diag(grad))

    w = free_gradient(factor)
    for iterations in range(1, cfg.max_iters + 1):
        step = min(cfg.step_init, step / cfg.backtrack_factor)
        accepted = False
        while step >= step_floor:
            cand = _prox_arr(lam - step * w, step, penalty, s_inv_arr, masks)
            m_cand = s_inv_arr + cand
            cand_factor = chol_if_feasible(m_cand)
            if cand_factor is not None:
                delta = cand - lam
                dn2 = _packed_norm_sq(delta)
                decrease = cfg.armijo_const * dn2 / step
                f_cand = (neg_logdet(cand_factor)
                          + float(np.sum(t_hat_arr * cand))
                          + _penalty_value(cand, penalty, s_inv_arr, masks))
                if f_cand <= f_total - decrease:
                    accepted = True
                    break
                # Near the optimum the true decrease drops below the
                # objective's floating-point resolution and the comparison
                # above stalls. Certify the decrease instead through
                # convexity: f(cand) - f(lam) <= <grad f(cand), delta>, a
                # cancellation-free quantity; the penalty difference is
                # added exactly. A tight no-increase guard on the computed
                # value stays in force.
                grad_cand = t_hat_arr - _sym_inv_from_chol(cand_factor)
                certified = (float(np.sum(grad_cand * delta))
                             + _penalty_value(cand, penalty, s_inv_arr, masks)
                             - _penalty_value(lam, penalty, s_inv_arr, masks))
                if (certified <= -decrease
                        and f_cand <= f_total + 256 * np.finfo(float).eps
                        * (1.0 + abs(f_total))):
                    accepted = True
                    break
            step *= cfg.backtrack_factor
        if not accepted:
            raise RuntimeError(
                "no feasible descent step found; inputs are pathological")
        lam, m_arr, factor, f_total = cand, m_cand, cand_factor, f_cand
        trace.append(f_total)
        # Fixed-point residual at the new iterate, with its own gradient:
        # the step-normalized distance to one more prox-gradient step.
        w = free_gradient(factor)
        probe = _prox_arr(lam - step * w, step, penalty, s_inv_arr, masks)
        residual = np.sqrt(_packed_norm_sq(probe - lam)) / step
        if residual <= cfg.grad_tol:
            converged = True
            break
        if f_total < -cfg.divergence_bound:
            # Objective diving past the bound signals an inconsistent
            # constraint set (dual unbounded below).
            break

    lam_sym = SymmetricMatrix(dim, _tril_of(lam))
    t_opt = SymmetricMatrix(dim, _tril_of(_sym_inv_from_chol(factor)))
    # Exact form of the estimated precision: structural zeros survive.
    k_opt = SymmetricMatrix(dim, _tril_of(m_arr))
    k_scale = float(np.max(np.abs(m_arr)))
    support_raw = support_of(k_opt, cfg.zero_tol * k_scale)

    result = SolveResult(
        lambda_opt=lam_sym,
        t_opt=t_opt,
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        support_estimate_raw=support_raw,
    )
    if penalty.kind == "known":
        t_opt_arr = t_opt.to_array()
        result.duality_gap = float(np.sum(lam * (t_hat_arr - t_opt_arr)))
        diff = np.where(omega_mask, t_opt_arr - t_hat_arr, 0.0)
        result.constraint_residual = float(np.linalg.norm(diff))
    return result


def solve_known_support(model: GaussianModel, t_hat: SymmetricMatrix,
                        omega: SupportPattern,
                        cfg: SolverConfig = SolverConfig(),
                        lam0: SymmetricMatrix | None = None) -> SolveResult:
    """Projected-gradient solve of the support-constrained problem; the
    result carries the duality gap and the constraint residual
    ||P_omega(T_o - T_hat)||_F."""
    return solve(model, t_hat, PenaltySpec.known_support(omega), cfg, lam0=lam0)
