"""No-short-sale global minimum variance portfolio over SETFs.

The covariance is estimated from SETF log-returns. The program

    minimize  w' S w   subject to  sum(w) = 1, w >= 0

is a convex QP for PSD S. It is solved by projected gradient descent on the
probability simplex with a backtracking line search, followed by an exact
solve of the equality-constrained problem on the detected support.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DimensionMismatchError, InvalidArgumentError, SolverError
from .files import write_frame
from .logging import get_logger
from .setf import absolute_turnover

logger = get_logger(__name__)

DEFAULT_MAX_ITERATIONS = 5000
DEFAULT_TOLERANCE = 1e-10

# Ridge is added when the smallest eigenvalue falls below this share of the trace.
RIDGE_TRIGGER = 1e-12
RIDGE_SCALE = 1e-10

# Accept an iterate after the cap if its scaled KKT residual is this small.
KKT_TOLERANCE = 1e-7


@dataclass(frozen=True)
class CovarianceMatrix:
    """Sample covariance of SETF log-returns.

    Attributes:
        values: Symmetric (n, n) matrix
        lookback: Number of price observations the estimate used
        end_date: Last date of the lookback window
        ridge: Multiple of the identity added for conditioning (0 if none)
    """

    values: np.ndarray
    lookback: int = 0
    end_date: pd.Timestamp | None = None
    ridge: float = 0.0

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


@dataclass
class SolveReport:
    """Diagnostics of one GMV solve."""

    objective: float
    iterations: int
    max_constraint_violation: float
    converged: bool = True
    polished: bool = False
    trace: list[tuple[int, float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class PortfolioWeights:
    """SETF weights of the GMV portfolio and how they were found."""

    weights: np.ndarray
    report: SolveReport

    def as_dict(self, labels: Sequence[str]) -> dict[str, float]:
        return {label: float(w) for label, w in zip(labels, self.weights, strict=True)}


def log_return_covariance(
    histories: np.ndarray | Sequence[Sequence[float]],
    end_date: pd.Timestamp | None = None,
    regularize: bool = True,
) -> CovarianceMatrix:
    """Covariance (divisor T-1) of log-returns of aligned price series.

    Args:
        histories: Prices of shape (observations, series), all positive
        end_date: Date of the last observation, recorded on the result
        regularize: Add a small ridge when the matrix is numerically singular

    Raises:
        DimensionMismatchError: Input is not 2-D
        InvalidArgumentError: Fewer than 2 observations, or a non-positive
            or non-finite price
    """
    prices = np.asarray(histories, dtype=float)
    if prices.ndim != 2:
        raise DimensionMismatchError(f"Expected (observations, series) prices, got shape {prices.shape}")
    observations, n = prices.shape
    if observations < 2:
        raise InvalidArgumentError(f"Need at least 2 aligned observations, got {observations}")
    if not np.isfinite(prices).all() or (prices <= 0.0).any():
        raise InvalidArgumentError("Price histories must be finite and positive")

    returns = np.log(prices[1:] / prices[:-1])
    count = returns.shape[0]
    divisor = max(count - 1, 1)
    centered = [
        returns[:, i] - math.fsum(returns[:, i]) / count for i in range(n)
    ]
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            value = math.fsum(centered[i] * centered[j]) / divisor
            values[i, j] = values[j, i] = value

    ridge = 0.0
    trace = math.fsum(np.diag(values))
    if regularize and n > 1 and trace > 0.0:
        smallest = float(np.linalg.eigvalsh(values)[0])
        if smallest < RIDGE_TRIGGER * trace:
            ridge = RIDGE_SCALE * trace / n
            values = values + ridge * np.eye(n)
            logger.debug("Covariance regularized", ridge=ridge, smallest_eigenvalue=smallest)

    return CovarianceMatrix(values=values, lookback=observations, end_date=end_date, ridge=ridge)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum(w) = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, len(v) + 1)
    rho = ind[u - css / ind > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _objective(a: np.ndarray, w: np.ndarray) -> float:
    return float(math.fsum(w * (a @ w)))


def _violation(w: np.ndarray) -> float:
    return max(abs(math.fsum(w) - 1.0), float(max(-w.min(), 0.0)))


def _kkt_residual(a: np.ndarray, w: np.ndarray) -> float:
    """Largest violation of the simplex optimality conditions at ``w``.

    With gradient g and multiplier mu = w'g, w is optimal iff g_i >= mu
    everywhere and g_i = mu wherever w_i > 0.
    """
    g = 2.0 * (a @ w)
    mu = math.fsum(w * g)
    below = float(np.max(mu - g))
    off_support = float(np.max(w * np.abs(g - mu)))
    return max(below, off_support, 0.0)


def _polish(a: np.ndarray, w: np.ndarray) -> np.ndarray | None:
    """Solve the equality-constrained QP on the support of ``w``.

    Drops the most negative coordinate and retries until the solution is
    non-negative; returns None if no support yields one.
    """
    support = [i for i in range(len(w)) if w[i] > 0.0]
    while support:
        k = len(support)
        system = np.zeros((k + 1, k + 1))
        system[:k, :k] = 2.0 * a[np.ix_(support, support)]
        system[:k, k] = -1.0
        system[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        solution = np.linalg.lstsq(system, rhs, rcond=None)[0][:k]
        if solution.min() >= 0.0:
            polished = np.zeros_like(w)
            polished[support] = solution
            return polished / math.fsum(polished)
        support.pop(int(np.argmin(solution)))
    return None


def solve_gmv(
    cov: CovarianceMatrix | np.ndarray,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    record_trace: bool = False,
) -> PortfolioWeights:
    """Long-only global minimum variance weights.

    The matrix is rescaled by its largest diagonal entry before solving, so
    the argmin does not depend on the overall scale of the covariance.

    Args:
        cov: Covariance matrix
        max_iterations: Projected-gradient iteration cap
        tolerance: Stop when the projected-gradient step is smaller than this
        record_trace: Keep ``(iteration, objective, violation)`` per iteration

    Raises:
        InvalidArgumentError: Non-finite or non-square matrix
        SolverError: No KKT point within the iteration cap; carries the best
            feasible iterate
    """
    values = cov.values if isinstance(cov, CovarianceMatrix) else np.asarray(cov, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] == 0:
        raise InvalidArgumentError(f"Covariance must be a non-empty square matrix, got {values.shape}")
    if not np.isfinite(values).all():
        raise InvalidArgumentError("Covariance matrix contains non-finite values")

    n = values.shape[0]
    scale = float(np.max(np.diag(values)))
    if n == 1 or scale <= 0.0:
        if scale <= 0.0 and n > 1:
            logger.warning("Covariance is all zero, using equal weights", assets=n)
        w = np.full(n, 1.0 / n)
        return PortfolioWeights(w, SolveReport(0.0, 0, _violation(w)))

    a = values / scale
    lipschitz = 2.0 * float(np.max(np.sum(np.abs(a), axis=1)))
    step = 1.0 / lipschitz
    w = np.full(n, 1.0 / n)
    f = _objective(a, w)
    trace: list[tuple[int, float, float]] = []
    converged = False

    iteration = 0
    for iteration in range(1, max_iterations + 1):
        g = 2.0 * (a @ w)
        if np.max(np.abs(project_simplex(w - g) - w)) <= tolerance:
            converged = True
            break

        t = min(step * 2.0, 1.0 / lipschitz * 64.0)
        while True:
            candidate = project_simplex(w - t * g)
            d = candidate - w
            f_candidate = _objective(a, candidate)
            if f_candidate <= f + float(g @ d) + float(d @ d) / (2.0 * t) or t < 1e-20:
                break
            t *= 0.5
        step = t
        w, f = candidate, f_candidate

        if record_trace:
            trace.append((iteration, f * scale, _violation(w)))
        logger.trace("GMV iteration", iteration=iteration, objective=f * scale, step=t)

    polished = False
    refined = _polish(a, w)
    if refined is not None:
        f_refined = _objective(a, refined)
        if f_refined <= f + 1e-12 * max(1.0, abs(f)) and _kkt_residual(a, refined) <= KKT_TOLERANCE:
            w, f, polished = refined, f_refined, True
            converged = True

    if not converged:
        residual = _kkt_residual(a, w)
        if residual > KKT_TOLERANCE:
            raise SolverError(
                f"GMV solver did not converge in {max_iterations} iterations "
                f"(KKT residual {residual:.3e})",
                best_iterate=w.copy(),
            )
        converged = True

    report = SolveReport(
        objective=_objective(values, w),
        iterations=iteration,
        max_constraint_violation=_violation(w),
        converged=converged,
        polished=polished,
        trace=trace,
    )
    logger.debug(
        "Solved GMV",
        assets=n,
        iterations=report.iterations,
        polished=polished,
        objective=report.objective,
    )
    return PortfolioWeights(weights=w, report=report)


def rebalancing_turnover(
    omega_old: Sequence[float], omega_new: Sequence[float], etf_prices_at_new: Sequence[float]
) -> float:
    """Dollar turnover of one portfolio rebalance: sum |d omega_i| * pi_i."""
    return absolute_turnover(omega_old, omega_new, etf_prices_at_new)


def write_solve_trace(report: SolveReport, path: Path) -> Path:
    """Write ``iteration,objective,constraint_violation`` rows of a traced solve."""
    frame = pd.DataFrame(
        report.trace, columns=["iteration", "objective", "constraint_violation"]
    )
    return write_frame(frame, Path(path))
