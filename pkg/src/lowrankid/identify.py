"""Identification: AR least squares, deterministic channel fits, and ARMAX
prediction-error minimization.

The estimators mirror the two-step structure of the underlying model class:
full-rank blocks are fitted by ordinary least squares (the innovation model
of the leading subvector), while the feedback channel between blocks is a
noiseless relation fitted by a deterministic overdetermined regression. The
(F, K) pair of the innovation form is estimated by a prediction error
method: Hannan-Rissanen initialization followed by Gauss-Newton refinement
with step halving and minimum-phase projection of the noise numerator.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.signal import lfilter

from .polymat import MatrixPolynomial, one_step_division, poly_shift
from .timeseries import TimeSeries, filter_series
from .transfer import RationalTransferMatrix, _poly_roots

__all__ = [
    "ChannelOrders",
    "ArmaxOrders",
    "ArmaxModel",
    "FitReport",
    "RankDeficientError",
    "EquationErrorWarning",
    "InputIdentification",
    "fit_ar",
    "fit_deterministic_channel",
    "predict_one_step",
    "fit_armax_pem",
    "fit_input_channel",
    "residual_series",
    "identify_with_input",
]

LSTSQ_RCOND = 1e-10
GN_MAX_ITER = 200
GN_MAX_HALVINGS = 20
GN_REL_TOL = 1e-10
GN_STALL_SLACK = 1e-6
MIN_PHASE_MARGIN = 1e-8


class RankDeficientError(RuntimeError):
    """Regressor matrix does not have full column rank."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(message)
        self.condition_number = condition_number


class EquationErrorWarning(UserWarning):
    """The regression ignores a correlated equation-error term; estimates are approximate."""


@dataclass(frozen=True)
class ChannelOrders:
    """Orders of a single-channel rational fit denom^-1 numer.

    na is the denominator degree; nb the total numerator degree in z^-1,
    with coefficients at powers delay..nb (so delay=0 includes a
    feedthrough term and delay>=1 pins the leading coefficients to zero).
    """

    na: int
    nb: int
    delay: int = 0

    def __post_init__(self):
        if self.na < 0 or self.nb < 0 or self.delay < 0:
            raise ValueError("orders must be nonnegative")
        if self.nb < self.delay:
            raise ValueError("numerator degree must be at least the delay")

    @property
    def n_b_coeffs(self) -> int:
        return self.nb - self.delay + 1


@dataclass(frozen=True)
class ArmaxOrders:
    """Orders for the ARMAX fit A y1 = B y2 + C e.

    A and C are monic of equal degree (the innovation normalization); B
    carries coefficients at powers delay..nb. nb=None drops the input
    path entirely (pure ARMA fit).
    """

    na: int
    nb: int | None
    nc: int
    delay: int = 1

    def __post_init__(self):
        if self.na < 0 or self.nc < 0:
            raise ValueError("orders must be nonnegative")
        if self.na != self.nc:
            raise ValueError("monic A and C must have the same degree")
        if self.nb is not None:
            if self.delay < 1:
                raise ValueError("the input polynomial must have at least a unit delay")
            if self.nb < self.delay:
                raise ValueError("numerator degree must be at least the delay")

    @property
    def n_b_coeffs(self) -> int:
        return 0 if self.nb is None else self.nb - self.delay + 1


@dataclass
class FitReport:
    """Outcome of one estimation run."""

    estimate: Any
    residual_rms: float
    cost_history: list[float] = field(default_factory=list)
    condition_number: float = float("nan")
    converged: bool = True
    rank_deficient: bool = False
    noise_variance: Any = None
    polynomials: dict[str, MatrixPolynomial] | None = None


def _lagged(v: np.ndarray, k: int) -> np.ndarray:
    """v delayed by k samples with zero prehistory."""
    if k == 0:
        return v.copy()
    out = np.zeros_like(v)
    out[k:] = v[:-k]
    return out


def _lstsq_report(x: np.ndarray, y: np.ndarray):
    """Min-norm least squares plus rank/conditioning diagnostics."""
    sv = np.linalg.svd(x, compute_uv=False)
    rank = int((sv > LSTSQ_RCOND * sv[0]).sum()) if sv.size and sv[0] > 0 else 0
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")
    theta, *_ = np.linalg.lstsq(x, y, rcond=LSTSQ_RCOND)
    deficient = rank < x.shape[1]
    return theta, cond, deficient


def fit_ar(y: TimeSeries, na: int) -> FitReport:
    """Least-squares (vector) autoregression y(t) = -sum A_k y(t-k) + e(t).

    Returns the all-pole innovation model denom^-1 with denominator
    I + sum A_k z^-k and the sample innovation covariance. Raises
    RankDeficientError when the regressors do not span the parameter
    space (for instance on a constant series).
    """
    if na < 1:
        raise ValueError("autoregressive order must be positive")
    data = y.data
    n, m = data.shape
    n_params = na * m * m
    if n <= 10 * n_params:
        raise ValueError(f"need more than {10 * n_params} samples to fit {n_params} parameters")
    rows = n - na
    x = np.empty((rows, na * m))
    for k in range(1, na + 1):
        x[:, (k - 1) * m : k * m] = -data[na - k : n - k]
    target = data[na:]
    sv = np.linalg.svd(x, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if sv.size == 0 or sv[0] == 0 or sv[-1] <= LSTSQ_RCOND * sv[0]:
        raise RankDeficientError(
            f"rank-deficient AR regressors (condition number {cond:.3g})", cond
        )
    theta, *_ = np.linalg.lstsq(x, target, rcond=LSTSQ_RCOND)
    resid = target - x @ theta
    a_coeffs = np.empty((na + 1, m, m))
    a_coeffs[0] = np.eye(m)
    for k in range(1, na + 1):
        a_coeffs[k] = theta[(k - 1) * m : k * m].T
    a_poly = MatrixPolynomial(a_coeffs)
    estimate = RationalTransferMatrix(a_poly, MatrixPolynomial.identity(m))
    sigma = resid.T @ resid / rows
    return FitReport(
        estimate=estimate,
        residual_rms=float(np.sqrt((resid**2).mean())),
        condition_number=cond,
        noise_variance=sigma,
        polynomials={"a": a_poly},
    )


def _normalize_orders(orders, channels: int) -> list[ChannelOrders]:
    if isinstance(orders, ChannelOrders):
        return [orders] * channels
    orders = list(orders)
    if len(orders) != channels:
        raise ValueError(f"need one order spec per channel ({channels}), got {len(orders)}")
    return orders


def _fit_rational_channels(
    output: TimeSeries, inputs: TimeSeries, orders: list[ChannelOrders]
) -> tuple[RationalTransferMatrix, FitReport]:
    """Per-channel LS fit of denom_i^-1 numer_i from output channel i on inputs.

    Each output channel is regressed on its own lags and on the input lags;
    rank-deficient regressions fall back to the min-norm solution and are
    flagged rather than raised (exactly consistent relations are routinely
    overparameterized).
    """
    if output.length != inputs.length:
        raise ValueError("series must be aligned with equal length")
    p = output.channels
    m = inputs.channels
    na_max = max(o.na for o in orders)
    nb_max = max(o.nb for o in orders)
    a_coeffs = np.zeros((na_max + 1, p, p))
    a_coeffs[0] = np.eye(p)
    b_coeffs = np.zeros((nb_max + 1, p, m))
    resid_sq = 0.0
    resid_n = 0
    worst_cond = 0.0
    deficient = False
    for i, o in enumerate(orders):
        t0 = max(o.na, o.nb)
        yi = output.data[:, i]
        cols = []
        for k in range(1, o.na + 1):
            cols.append(yi[t0 - k : len(yi) - k])
        for k in range(o.delay, o.nb + 1):
            for j in range(m):
                cols.append(inputs.data[t0 - k : len(yi) - k, j])
        x = np.column_stack(cols) if cols else np.empty((len(yi) - t0, 0))
        target = yi[t0:]
        if x.shape[1]:
            theta, cond, bad = _lstsq_report(x, target)
            resid = target - x @ theta
        else:
            theta, cond, bad = np.empty(0), 0.0, False
            resid = target
        worst_cond = max(worst_cond, cond)
        deficient = deficient or bad
        resid_sq += float((resid**2).sum())
        resid_n += resid.size
        for k in range(1, o.na + 1):
            a_coeffs[k, i, i] = -theta[k - 1]
        at = o.na
        for k in range(o.delay, o.nb + 1):
            b_coeffs[k, i, :] = theta[at : at + m]
            at += m
    estimate = RationalTransferMatrix(MatrixPolynomial(a_coeffs), MatrixPolynomial(b_coeffs))
    report = FitReport(
        estimate=estimate,
        residual_rms=float(np.sqrt(resid_sq / max(resid_n, 1))),
        condition_number=worst_cond,
        rank_deficient=deficient,
        polynomials={"a": estimate.denom, "b": estimate.numer},
    )
    return estimate, report


def fit_deterministic_channel(y1: TimeSeries, y2: TimeSeries, orders) -> FitReport:
    """Fit the noiseless channel y2 = denom^-1 numer applied to y1.

    The relation between the blocks of an exactly rank-deficient process is
    deterministic, so with sufficient orders the residual is numerically
    zero. Overparameterized fits give rank-deficient regressions; these are
    resolved by the min-norm solution and flagged in the report.
    """
    orders = _normalize_orders(orders, y2.channels)
    _, report = _fit_rational_channels(y2, y1, orders)
    return report


def fit_input_channel(y: TimeSeries, u: TimeSeries, orders) -> FitReport:
    """Per-channel LS fit of the input path of y = F u + noise.

    The regression treats y = F u as a deterministic relation and ignores
    the correlated noise term, matching the reference procedure; estimates
    are therefore approximate (consistent only as the noise vanishes) and
    an EquationErrorWarning is emitted.
    """
    orders = _normalize_orders(orders, y.channels)
    if any(o.delay < 1 for o in orders):
        raise ValueError("the input channel fit requires at least a unit delay")
    warnings.warn(
        "input-channel regression ignores the correlated noise term; "
        "estimates are approximate",
        EquationErrorWarning,
        stacklevel=2,
    )
    _, report = _fit_rational_channels(y, u, orders)
    return report


# -- ARMAX / prediction error method ------------------------------------------


@dataclass(frozen=True)
class ArmaxModel:
    """Scalar-output ARMAX polynomials a y1 = b y2 + c e, a and c monic."""

    a: MatrixPolynomial
    b: MatrixPolynomial | None
    c: MatrixPolynomial

    def __post_init__(self):
        if self.a.shape != (1, 1) or self.c.shape != (1, 1):
            raise ValueError("a and c must be scalar polynomials")
        if not (self.a.is_monic() and self.c.is_monic()):
            raise ValueError("a and c must be monic")
        if self.b is not None and self.b.rows != 1:
            raise ValueError("b must be a single-row polynomial")

    @property
    def f(self) -> RationalTransferMatrix:
        if self.b is None:
            raise ValueError("model has no input path")
        return RationalTransferMatrix(self.a, self.b)

    @property
    def k(self) -> RationalTransferMatrix:
        return RationalTransferMatrix(self.a, self.c)


def _is_minimum_phase(coeffs: np.ndarray) -> bool:
    roots = _poly_roots(coeffs)
    return bool(np.all(np.abs(roots) > 1.0)) if roots.size else True


def _project_minimum_phase(coeffs: np.ndarray) -> np.ndarray:
    """Reflect roots of a monic (at z^-1 = 0) polynomial to the stable region.

    Roots in the x = z^-1 plane with |x| <= 1 correspond to zeros on or
    outside the unit circle; they are reflected to their conjugate
    reciprocals (with a small outward margin) and the polynomial is
    rescaled to keep its constant term at one.
    """
    roots = _poly_roots(coeffs)
    if roots.size == 0:
        return coeffs
    bad = np.abs(roots) <= 1.0 + MIN_PHASE_MARGIN
    if not bad.any():
        return coeffs
    fixed = roots.copy()
    reflect = bad & (np.abs(roots) > MIN_PHASE_MARGIN)
    fixed[reflect] = 1.0 / np.conj(roots[reflect])
    tiny = bad & ~reflect
    fixed[tiny] = 2.0  # degenerate root at the origin: replace outright
    still = np.abs(fixed) <= 1.0 + MIN_PHASE_MARGIN
    fixed[still] *= (1.0 + 2.0 * MIN_PHASE_MARGIN) / np.abs(fixed[still])
    desc = np.poly(fixed)
    asc = desc[::-1]
    out = np.real(asc / asc[0])
    lead = coeffs[-1]
    return np.concatenate([out, np.zeros(len(coeffs) - len(out))]) if len(out) < len(coeffs) else out


def predict_one_step(model: ArmaxModel, y1: TimeSeries, y2: TimeSeries | None = None) -> TimeSeries:
    """One-step-ahead predictor of y1 driven by past outputs and inputs.

    Splitting c = a + z^-1 c1 turns the model into the causal recursion
    c * yhat(t) = c1 * y1(t-1) + b * y2(t), run from zero initial
    conditions. Requires a minimum-phase c so the recursion is stable.
    """
    if y1.channels != 1:
        raise ValueError("the predictor is defined channel by channel")
    if not _is_minimum_phase(model.c.scalar_coefficients()):
        raise ValueError("prediction requires a minimum-phase noise numerator")
    c1 = one_step_division(model.c, model.a)
    numer_own = poly_shift(c1, 1)
    parts = [RationalTransferMatrix(model.c, numer_own)]
    series = [y1]
    if model.b is not None and not model.b.is_zero:
        if y2 is None:
            raise ValueError("model has an input path but no input series was given")
        parts.append(RationalTransferMatrix(model.c, model.b))
        series.append(y2)
    total = np.zeros((y1.length, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for g, s in zip(parts, series):
            total += filter_series(g, s).data
    return TimeSeries(total)


def _prediction_error(
    y: np.ndarray, u: np.ndarray | None, a: np.ndarray, b: np.ndarray | None, c: np.ndarray
) -> np.ndarray:
    """epsilon = y - yhat for the scalar ARMAX recursion, zero initial state."""
    c1 = np.zeros(max(len(a), len(c)) - 1)
    tail_c = c[1:]
    tail_a = a[1:]
    c1[: len(tail_c)] += tail_c
    c1[: len(tail_a)] -= tail_a
    drive = lfilter(np.concatenate([[0.0], c1]), [1.0], y)
    if b is not None and u is not None:
        for j in range(u.shape[1]):
            drive += lfilter(b[:, j], [1.0], u[:, j])
    yhat = lfilter([1.0], c, drive)
    return y - yhat


def _unpack(theta: np.ndarray, orders: ArmaxOrders, p: int):
    na, nc = orders.na, orders.nc
    nb_count = orders.n_b_coeffs
    a = np.concatenate([[1.0], theta[:na]])
    c = np.concatenate([[1.0], theta[na + nb_count * p :]])
    b = None
    if orders.nb is not None:
        b = np.zeros((orders.nb + 1, p))
        flat = theta[na : na + nb_count * p].reshape(nb_count, p)
        b[orders.delay :] = flat
    return a, b, c


def _hannan_rissanen_init(y: np.ndarray, u: np.ndarray | None, orders: ArmaxOrders) -> np.ndarray:
    n = len(y)
    long_order = min(20, n // 20)
    long_order = max(long_order, orders.nc + 1)
    cols = [_lagged(y, k) for k in range(1, long_order + 1)]
    theta_long, *_ = np.linalg.lstsq(np.column_stack(cols), y, rcond=LSTSQ_RCOND)
    a_long = np.concatenate([[1.0], -theta_long])
    ehat = lfilter(a_long, [1.0], y)
    t0 = max(orders.na, orders.nb or 0, orders.nc, long_order)
    cols = [-_lagged(y, k)[t0:] for k in range(1, orders.na + 1)]
    if orders.nb is not None:
        for k in range(orders.delay, orders.nb + 1):
            for j in range(u.shape[1]):
                cols.append(_lagged(u[:, j], k)[t0:])
    for k in range(1, orders.nc + 1):
        cols.append(_lagged(ehat, k)[t0:])
    x = np.column_stack(cols)
    theta, *_ = np.linalg.lstsq(x, y[t0:], rcond=LSTSQ_RCOND)
    return theta


def fit_armax_pem(y1: TimeSeries, y2: TimeSeries | None, orders: ArmaxOrders) -> FitReport:
    """Prediction-error fit of the ARMAX model a y1 = b y2 + c e.

    Two phases: a Hannan-Rissanen initialization (long AR for innovation
    proxies, then one least-squares pass with lagged innovations standing
    in for the noise regressors), followed by Gauss-Newton refinement of
    the exact one-step prediction error with step halving and
    minimum-phase projection of c after every step.
    """
    if y1.channels != 1:
        raise ValueError("the ARMAX fit is defined channel by channel")
    if orders.nb is not None and y2 is None:
        raise ValueError("orders include an input path but no input series was given")
    y = y1.data[:, 0]
    u = y2.data if (y2 is not None and orders.nb is not None) else None
    if u is not None and y2.length != y1.length:
        raise ValueError("series must be aligned with equal length")
    p = u.shape[1] if u is not None else 0
    n_params = orders.na + orders.nc + orders.n_b_coeffs * p
    if len(y) <= 10 * n_params:
        raise ValueError(f"need more than {10 * n_params} samples to fit {n_params} parameters")

    theta = _hannan_rissanen_init(y, u, orders)
    a, b, c = _unpack(theta, orders, p)
    c = _project_minimum_phase(c)
    theta = _pack_c(theta, c, orders, p)

    eps = _prediction_error(y, u, a, b, c)
    cost = float(eps @ eps)
    history = [cost]
    converged = False
    cond = float("nan")
    for _ in range(GN_MAX_ITER):
        a, b, c = _unpack(theta, orders, p)
        yf = lfilter([1.0], c, y)
        ef = lfilter([1.0], c, eps)
        cols = [_lagged(yf, k) for k in range(1, orders.na + 1)]
        if u is not None:
            uf = np.column_stack([lfilter([1.0], c, u[:, j]) for j in range(p)])
            for k in range(orders.delay, orders.nb + 1):
                for j in range(p):
                    cols.append(-_lagged(uf[:, j], k))
        cols.extend(-_lagged(ef, k) for k in range(1, orders.nc + 1))
        jac = np.column_stack(cols)
        sv = np.linalg.svd(jac, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
        step, *_ = np.linalg.lstsq(jac, -eps, rcond=LSTSQ_RCOND)
        lam = 1.0
        improved = False
        best_trial_cost = np.inf
        for _ in range(GN_MAX_HALVINGS + 1):
            trial = theta + lam * step
            ta, tb, tc = _unpack(trial, orders, p)
            tc = _project_minimum_phase(tc)
            trial = _pack_c(trial, tc, orders, p)
            t_eps = _prediction_error(y, u, ta, tb, tc)
            t_cost = float(t_eps @ t_eps)
            if t_cost <= cost:  # equality: at the optimum, let the tolerance stop us
                improved = True
                break
            best_trial_cost = min(best_trial_cost, t_cost)
            lam *= 0.5
        if not improved:
            # no descent left: a flat region or the minimum-phase boundary
            # (MA-root pile-up) counts as convergence; a genuine divergence
            # (every trial much worse) does not
            converged = best_trial_cost <= cost * (1.0 + GN_STALL_SLACK)
            break
        rel = (cost - t_cost) / max(cost, 1e-300)
        theta, eps, cost = trial, t_eps, t_cost
        history.append(cost)
        if rel < GN_REL_TOL:
            converged = True
            break
    else:
        converged = True  # iteration budget exhausted with steady descent

    a, b, c = _unpack(theta, orders, p)
    if u is None:
        # pure ARMA: nothing else shares the denominator, so near-cancelling
        # pole/zero pairs can be merged without touching any other transfer
        a, c, eps, cost = _snap_common_root_pairs(y, a, c, eps, cost)
    a_poly = MatrixPolynomial(a)
    c_poly = MatrixPolynomial(c)
    b_poly = MatrixPolynomial(b[:, None, :]) if b is not None else None
    model = ArmaxModel(a=a_poly, b=b_poly, c=c_poly)
    sigma2 = cost / len(y)
    return FitReport(
        estimate=model,
        residual_rms=float(np.sqrt(sigma2)),
        cost_history=history,
        condition_number=cond,
        converged=converged,
        noise_variance=sigma2,
        polynomials={"a": a_poly, "c": c_poly} | ({"b": b_poly} if b_poly is not None else {}),
    )


def _pack_c(theta: np.ndarray, c: np.ndarray, orders: ArmaxOrders, p: int) -> np.ndarray:
    out = theta.copy()
    out[orders.na + orders.n_b_coeffs * p :] = c[1:]
    return out


def _rebuild_from_roots(roots: np.ndarray, n_coeffs: int) -> np.ndarray:
    desc = np.atleast_1d(np.poly(roots))
    asc = np.real(desc[::-1])
    out = np.zeros(n_coeffs)
    out[: len(asc)] = asc / asc[0]
    return out


SNAP_TOL = 0.15
SNAP_COST_SLACK = 1.01


def _snap_common_root_pairs(y, a, c, eps, cost):
    """Merge near-cancelling pole/zero pairs of an ARMA estimate.

    Overparameterized fits leave a nearly common factor in a and c whose
    placement is cost-flat but can distort the frequency response locally.
    Snapping the closest root pairs to their midpoint makes the factor
    exactly common (it then cancels in the fraction) and is accepted only
    if the prediction-error cost stays within a 1% slack.
    """
    while True:
        ra = _poly_roots(a)
        rc = _poly_roots(c)
        if ra.size == 0 or rc.size == 0:
            break
        dist = np.abs(ra[:, None] - rc[None, :])
        np.putmask(dist, dist < 1e-9, np.inf)  # already-common factors: leave alone
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if not np.isfinite(dist[i, j]) or dist[i, j] >= SNAP_TOL * max(1.0, abs(ra[i])):
            break
        mid = 0.5 * (ra[i] + rc[j])
        real_a = abs(ra[i].imag) < 1e-9
        real_c = abs(rc[j].imag) < 1e-9
        if real_a != real_c:
            break
        ra2 = ra.astype(complex).copy()
        rc2 = rc.astype(complex).copy()
        if real_a:
            ra2[i] = mid.real
            rc2[j] = mid.real
        else:
            ia = int(np.argmin(np.abs(ra - np.conj(ra[i]))))
            jc = int(np.argmin(np.abs(rc - np.conj(rc[j]))))
            if ia == i or jc == j:
                break
            ra2[i], ra2[ia] = mid, np.conj(mid)
            rc2[j], rc2[jc] = mid, np.conj(mid)
        a2 = _rebuild_from_roots(ra2, len(a))
        c2 = _project_minimum_phase(_rebuild_from_roots(rc2, len(c)))
        eps2 = _prediction_error(y, None, a2, None, c2)
        cost2 = float(eps2 @ eps2)
        if cost2 > cost * SNAP_COST_SLACK:
            break
        a, c, eps, cost = a2, c2, eps2, cost2
    return a, c, eps, cost


# -- exogenous-input pipeline --------------------------------------------------


def residual_series(y: TimeSeries, u: TimeSeries, f_hat: RationalTransferMatrix) -> TimeSeries:
    """Remove the input path: y - f_hat * u (the noise-driven remainder)."""
    if f_hat.in_dim != u.channels or f_hat.out_dim != y.channels:
        raise ValueError("estimate dimensions do not match the series")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pred = filter_series(f_hat, u)
    return TimeSeries(y.data - pred.data, y.labels)


@dataclass
class InputIdentification:
    """Result of the two-stage pipeline: input path first, then the noise shaping."""

    f_hat: RationalTransferMatrix
    k_hat: RationalTransferMatrix | None
    residual: TimeSeries
    f_report: FitReport
    k_reports: list[FitReport]
    degenerate: bool


def identify_with_input(
    y: TimeSeries,
    u: TimeSeries,
    f_orders,
    k_orders: Sequence[ArmaxOrders] | ArmaxOrders,
) -> InputIdentification:
    """Estimate F from the deterministic regression on u, then fit the
    noise shaping channel by channel on the residual.

    The residual y - F_hat u is (approximately) a rank-deficient series
    driven by the shared innovation alone; each of its channels is fitted
    as a normalized ARMA model (monic numerator and denominator of equal
    degree). A numerically zero residual (noise-free data) skips the
    second stage and is reported as degenerate.
    """
    f_report = fit_input_channel(y, u, f_orders)
    f_hat = f_report.estimate
    resid = residual_series(y, u, f_hat)
    # refiltering u from zero initial state leaves a fresh head transient in
    # the residual; skip it before judging degeneracy and fitting the shaping
    orders_list = _normalize_orders(f_orders, y.channels)
    skip = max(32, max(o.na + o.nb for o in orders_list))
    resid_fit = resid.drop_head(skip) if resid.length > 2 * skip else resid
    scale = float(np.sqrt((y.data**2).mean()))
    if float(np.sqrt((resid_fit.data**2).mean())) < 1e-10 * max(scale, 1e-300):
        return InputIdentification(
            f_hat=f_hat,
            k_hat=None,
            residual=resid,
            f_report=f_report,
            k_reports=[],
            degenerate=True,
        )
    if isinstance(k_orders, ArmaxOrders):
        k_orders = [k_orders] * y.channels
    k_orders = list(k_orders)
    if len(k_orders) != y.channels:
        raise ValueError("need one ARMA order spec per output channel")
    k_reports = []
    k_blocks = []
    for i, orders in enumerate(k_orders):
        rep = fit_armax_pem(resid_fit.channel(i), None, orders)
        k_reports.append(rep)
        k_blocks.append(rep.estimate.k)
    from .transfer import rtm_vstack

    k_hat = rtm_vstack(k_blocks)
    return InputIdentification(
        f_hat=f_hat,
        k_hat=k_hat,
        residual=resid,
        f_report=f_report,
        k_reports=k_reports,
        degenerate=False,
    )
