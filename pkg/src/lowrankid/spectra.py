"""Spectral density grids, closed-loop transfer algebra and the deterministic channel.

The central objects are spectral density matrices evaluated on a frequency
grid and the feedback interconnection y1 = F y2 + v, y2 = H y1 + r. When
the joint process is rank deficient and y1 carries the full rank, the
feedback channel is deterministic and its frequency response can be read
off the spectrum as Phi21 * Phi11^-1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .polymat import MatrixPolynomial
from .timeseries import NoiseSpec
from .transfer import (
    RationalTransferMatrix,
    frequency_response,
    rtm_identity,
    rtm_inverse,
    rtm_mul,
    rtm_simplify,
    rtm_sub,
    rtm_vstack,
    stability_report,
)

__all__ = [
    "SpectrumGrid",
    "FeedbackModel",
    "ClosedLoop",
    "RankReport",
    "default_freq_grid",
    "constant_spectrum",
    "spectrum_from_factor",
    "check_rank",
    "closed_loop_transfer",
    "spectrum_from_feedback",
    "extract_h_from_spectrum",
    "extract_h_from_factor",
    "assemble_w_from_fhk",
    "select_full_rank_channels",
]

HERMITIAN_TOL = 1e-10
PSD_EIG_TOL = 1e-9
RANK_TOL = 1e-8


def default_freq_grid(n: int = 512) -> np.ndarray:
    """Uniform midpoint grid on (0, pi); avoids the endpoints where real
    factors can degenerate."""
    return np.pi * (np.arange(n) + 0.5) / n


class SpectrumGrid:
    """Hermitian PSD matrices Phi(e^{i theta}) sampled on a frequency grid."""

    __slots__ = ("freqs", "values", "partition_m")

    def __init__(self, freqs, values, partition_m: int | None = None):
        freqs = np.asarray(freqs, dtype=float).ravel()
        values = np.asarray(values, dtype=complex)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise ValueError(f"values must be (n, dim, dim), got {values.shape}")
        if values.shape[0] != freqs.size:
            raise ValueError("one matrix per frequency required")
        scale = max(np.abs(values).max(), 1.0)
        herm = np.abs(values - values.conj().transpose(0, 2, 1)).max()
        if herm > HERMITIAN_TOL * scale:
            raise ValueError(f"values are not Hermitian (deviation {herm:.3g})")
        eigmin = np.linalg.eigvalsh(values).min()
        if eigmin < -PSD_EIG_TOL * scale:
            raise ValueError(f"values are not positive semidefinite (min eigenvalue {eigmin:.3g})")
        if partition_m is not None and not 0 < partition_m < values.shape[1]:
            raise ValueError("partition must split the matrix into two nonempty blocks")
        self.freqs = freqs
        self.values = values
        self.partition_m = partition_m

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_freqs(self) -> int:
        return self.freqs.size

    def block(self, rows: slice, cols: slice) -> np.ndarray:
        return self.values[:, rows, cols]

    def upper_left(self) -> np.ndarray:
        m = self._require_partition()
        return self.values[:, :m, :m]

    def lower_left(self) -> np.ndarray:
        m = self._require_partition()
        return self.values[:, m:, :m]

    def _require_partition(self) -> int:
        if self.partition_m is None:
            raise ValueError("spectrum has no block partition set")
        return self.partition_m

    def __repr__(self) -> str:
        return f"SpectrumGrid(dim={self.dim}, n_freqs={self.n_freqs}, partition_m={self.partition_m})"


def constant_spectrum(matrix, freqs, partition_m: int | None = None) -> SpectrumGrid:
    """Frequency-flat spectrum; accepts a scalar, a diagonal, or a full matrix."""
    freqs = np.asarray(freqs, dtype=float).ravel()
    mat = np.asarray(matrix, dtype=complex)
    if mat.ndim == 0:
        mat = mat.reshape(1, 1)
    elif mat.ndim == 1:
        mat = np.diag(mat)
    vals = np.broadcast_to(mat, (freqs.size,) + mat.shape).copy()
    return SpectrumGrid(freqs, vals, partition_m)


def _coerce_covariance(noise_variance, dim: int) -> np.ndarray:
    lam = np.asarray(noise_variance, dtype=float)
    if lam.ndim == 0:
        lam = np.full(dim, float(lam))
    if lam.ndim == 1:
        if lam.size != dim:
            raise ValueError("variance must have one entry per noise channel")
        return np.diag(lam)
    if lam.shape != (dim, dim):
        raise ValueError(f"covariance must be {dim}x{dim}")
    return lam


def spectrum_from_factor(w: RationalTransferMatrix, noise_variance, freqs) -> SpectrumGrid:
    """Phi = W Lambda W* evaluated per grid point."""
    if not stability_report(w).is_stable:
        raise ValueError("spectral factor must be strictly stable")
    lam = _coerce_covariance(noise_variance, w.in_dim)
    resp = frequency_response(w, freqs)
    vals = resp @ lam @ resp.conj().transpose(0, 2, 1)
    vals = 0.5 * (vals + vals.conj().transpose(0, 2, 1))
    m = w.in_dim if w.out_dim > w.in_dim else None
    return SpectrumGrid(freqs, vals, partition_m=m)


class RankReport(NamedTuple):
    """Almost-everywhere rank plus the per-frequency rank profile."""

    rank: int
    per_frequency: np.ndarray


def check_rank(phi: SpectrumGrid, rank_tol: float = RANK_TOL) -> RankReport:
    """Count singular values above rank_tol relative to each frequency's largest."""
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    sv = np.linalg.svd(phi.values, compute_uv=False)
    largest = sv[:, :1]
    counts = (sv > rank_tol * np.maximum(largest, 1e-300)).sum(axis=1)
    counts[largest[:, 0] == 0.0] = 0
    return RankReport(rank=int(counts.max()), per_frequency=counts)


# -- feedback interconnection --------------------------------------------------


@dataclass(frozen=True)
class ClosedLoop:
    """Closed-loop transfer from the stacked noises [v; r] to the outputs [y1; y2].

    `t` is the combined (m+p) x (m+p) fraction; the four blocks are exposed
    individually, named by the map they realize.
    """

    t: RationalTransferMatrix
    v_to_y1: RationalTransferMatrix
    r_to_y1: RationalTransferMatrix
    v_to_y2: RationalTransferMatrix
    r_to_y2: RationalTransferMatrix
    m: int
    p: int

    def blocks(self):
        return (self.v_to_y1, self.r_to_y1, self.v_to_y2, self.r_to_y2)

    def is_internally_stable(self) -> bool:
        return all(stability_report(b).is_stable for b in self.blocks())


def closed_loop_transfer(f: RationalTransferMatrix, h: RationalTransferMatrix) -> ClosedLoop:
    """Invert the loop equations y1 = F y2 + v, y2 = H y1 + r.

    Requires a well-posed loop: I - F(inf) H(inf) invertible, which holds
    whenever the forward path has a delay.
    """
    m, p = f.shape
    if h.shape != (p, m):
        raise ValueError(f"feedback must be {p}x{m} to close the loop against {m}x{p}")
    gain = np.eye(m) - f.gain_at_infinity() @ h.gain_at_infinity()
    sv = np.linalg.svd(gain, compute_uv=False)
    if sv[-1] <= 1e-9 * max(1.0, sv[0]):
        raise ValueError("ill-posed feedback loop: I - F(inf) H(inf) is singular")
    # combined fraction: [[A_f, -B_f], [-B_h, A_h]]^-1 diag(A_f, A_h)
    deg_d = max(f.denom.degree, h.denom.degree, f.numer.degree, h.numer.degree)
    den = np.zeros((deg_d + 1, m + p, m + p))
    num = np.zeros((deg_d + 1, m + p, m + p))
    den[: f.denom.degree + 1, :m, :m] = f.denom.coeffs
    den[: f.numer.degree + 1, :m, m:] = -f.numer.coeffs
    den[: h.numer.degree + 1, m:, :m] = -h.numer.coeffs
    den[: h.denom.degree + 1, m:, m:] = h.denom.coeffs
    num[: f.denom.degree + 1, :m, :m] = f.denom.coeffs
    num[: h.denom.degree + 1, m:, m:] = h.denom.coeffs
    combined = RationalTransferMatrix(MatrixPolynomial(den), MatrixPolynomial(num))
    v_to_y1 = rtm_inverse(rtm_sub(rtm_identity(m), rtm_mul(f, h)))
    r_to_y2 = rtm_inverse(rtm_sub(rtm_identity(p), rtm_mul(h, f)))
    r_to_y1 = rtm_mul(v_to_y1, f)
    v_to_y2 = rtm_mul(r_to_y2, h)
    return ClosedLoop(
        t=combined,
        v_to_y1=v_to_y1,
        r_to_y1=r_to_y1,
        v_to_y2=v_to_y2,
        r_to_y2=r_to_y2,
        m=m,
        p=p,
    )


def spectrum_from_feedback(
    f: RationalTransferMatrix,
    h: RationalTransferMatrix,
    phi_v: SpectrumGrid,
    phi_r: SpectrumGrid,
) -> SpectrumGrid:
    """Propagate the noise spectra through the loop: Phi = T diag(Phi_v, Phi_r) T*."""
    if not np.allclose(phi_v.freqs, phi_r.freqs):
        raise ValueError("noise spectra must share the frequency grid")
    m, p = f.shape
    if phi_v.dim != m or phi_r.dim != p:
        raise ValueError("noise spectra dimensions must match the loop partition")
    loop = closed_loop_transfer(f, h)
    if not loop.is_internally_stable():
        raise ValueError("closed loop is not internally stable")
    t_resp = frequency_response(loop.t, phi_v.freqs)
    mid = np.zeros((phi_v.n_freqs, m + p, m + p), dtype=complex)
    mid[:, :m, :m] = phi_v.values
    mid[:, m:, m:] = phi_r.values
    vals = t_resp @ mid @ t_resp.conj().transpose(0, 2, 1)
    vals = 0.5 * (vals + vals.conj().transpose(0, 2, 1))
    return SpectrumGrid(phi_v.freqs, vals, partition_m=m)


def extract_h_from_spectrum(phi: SpectrumGrid) -> np.ndarray:
    """Per-frequency response Phi21 * Phi11^-1 of the deterministic channel.

    Requires the full-rank block partition to be set and Phi11 to be
    invertible on the whole grid; a singular Phi11 signals that the
    components need reordering first.
    """
    m = phi._require_partition()
    phi11 = phi.upper_left()
    phi21 = phi.lower_left()
    sv = np.linalg.svd(phi11, compute_uv=False)
    if np.any(sv[:, -1] <= 1e-12 * np.maximum(sv[:, 0], 1e-300)):
        raise ValueError(
            "Phi11 is singular at some grid point; reorder components so the "
            "first block carries the full rank"
        )
    # X = Phi21 Phi11^-1  <=>  Phi11^T X^T = Phi21^T
    xt = np.linalg.solve(phi11.transpose(0, 2, 1), phi21.transpose(0, 2, 1))
    return xt.transpose(0, 2, 1)


def _split_rows(w: RationalTransferMatrix, m: int):
    """Top-m and bottom row blocks of a tall fraction, each as a fraction."""
    from .polymat import poly_adjugate, poly_det, poly_mul, poly_scale

    p = w.out_dim - m
    if p <= 0:
        raise ValueError("factor must have more outputs than the split index")
    dcoef = w.denom.coeffs
    off_upper = dcoef[:, :m, m:].any()
    off_lower = dcoef[:, m:, :m].any()
    if not off_upper and not off_lower:
        top = RationalTransferMatrix(dcoef[:, :m, :m], w.numer.coeffs[:, :m, :])
        bottom = RationalTransferMatrix(dcoef[:, m:, m:], w.numer.coeffs[:, m:, :])
        return top, bottom
    det = poly_det(w.denom)
    adjn = poly_mul(poly_adjugate(w.denom), w.numer)
    eye_m = MatrixPolynomial.identity(m)
    eye_p = MatrixPolynomial.identity(p)
    top = rtm_simplify(
        RationalTransferMatrix(poly_scale(eye_m, det), adjn.coeffs[:, :m, :])
    )
    bottom = rtm_simplify(
        RationalTransferMatrix(poly_scale(eye_p, det), adjn.coeffs[:, m:, :])
    )
    return top, bottom


def extract_h_from_factor(w: RationalTransferMatrix, m: int) -> RationalTransferMatrix:
    """Deterministic channel from a tall factor: bottom block times inverse of top block."""
    if w.in_dim != m:
        raise ValueError("the split index must equal the factor's input dimension")
    top, bottom = _split_rows(w, m)
    return rtm_simplify(rtm_mul(bottom, rtm_inverse(top)))


@dataclass(frozen=True)
class FeedbackModel:
    """Innovation-form loop: y1 = f y2 + k e, y2 = h y1, with normalized k.

    The forward path f must carry at least a unit delay (well-posedness),
    k must be normalized to the identity at infinity, and the closed loop
    must be internally stable.
    """

    f: RationalTransferMatrix
    h: RationalTransferMatrix
    k: RationalTransferMatrix
    noise: NoiseSpec

    def __post_init__(self):
        m, p = self.f.shape
        if self.h.shape != (p, m):
            raise ValueError(f"feedback channel must be {p}x{m}, got {self.h.shape}")
        if self.k.shape != (m, m):
            raise ValueError(f"noise shaping must be {m}x{m}, got {self.k.shape}")
        if self.noise.dim != m:
            raise ValueError("noise dimension must match the full-rank block")
        if np.abs(self.f.gain_at_infinity()).max() > 1e-12:
            raise ValueError("forward path must have at least a unit delay")
        if np.abs(self.k.gain_at_infinity() - np.eye(m)).max() > 1e-9:
            raise ValueError("noise shaping must be normalized to identity at infinity")
        if not closed_loop_transfer(self.f, self.h).is_internally_stable():
            raise ValueError("closed loop is not internally stable")

    @property
    def m(self) -> int:
        return self.f.out_dim

    @property
    def p(self) -> int:
        return self.h.out_dim


def assemble_w_from_fhk(model: FeedbackModel) -> RationalTransferMatrix:
    """Stacked spectral factor of the loop output: [(I-FH)^-1 K; H (I-FH)^-1 K]."""
    loop = closed_loop_transfer(model.f, model.h)
    w1 = rtm_mul(loop.v_to_y1, model.k)
    w2 = rtm_mul(model.h, w1)
    w = rtm_vstack([w1, w2])
    if not stability_report(w).is_stable:
        raise ValueError("assembled factor is unstable")
    return w


def select_full_rank_channels(phi: SpectrumGrid, m: int) -> list[int]:
    """Greedy reordering so the leading m channels carry the full rank.

    Channels are added one at a time, each time keeping the candidate that
    maximizes the grid-averaged smallest singular value of the selected
    subspectrum. Returns a permutation: selected channels first.
    """
    if not 0 < m <= phi.dim:
        raise ValueError("m must be between 1 and the process dimension")
    selected: list[int] = []
    remaining = list(range(phi.dim))
    for _ in range(m):
        best, best_score = None, -1.0
        for c in remaining:
            idx = selected + [c]
            sub = phi.values[np.ix_(np.arange(phi.n_freqs), idx, idx)]
            score = np.linalg.svd(sub, compute_uv=False)[:, -1].mean()
            if score > best_score:
                best, best_score = c, score
        selected.append(best)
        remaining.remove(best)
    return selected + remaining
