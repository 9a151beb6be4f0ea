"""Seeded white-noise generation and causal filtering of multichannel series.

Noise uses the counter-based Philox generator with an explicit Box-Muller
transform, so identical seeds give bit-identical Gaussian draws on any
platform. All filters run the causal recursion denom * y = numer * x from
zero initial conditions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .transfer import RationalTransferMatrix, stability_report, warn_if_unstable

__all__ = [
    "TimeSeries",
    "NoiseSpec",
    "generate_white_noise",
    "filter_series",
    "simulate_low_rank",
    "simulate_with_input",
    "write_timeseries_csv",
    "read_timeseries_csv",
]

INPUT_STREAM_OFFSET = 2654435769  # separates input/noise streams derived from one run seed


class TimeSeries:
    """A length x channels real trajectory with optional channel labels."""

    __slots__ = ("data", "labels")

    def __init__(self, data, labels: tuple[str, ...] | None = None):
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"data must be (length, channels) with length >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("time series entries must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        self.data = arr
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != arr.shape[1]:
                raise ValueError("one label per channel required")
        self.labels = labels

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    def channel(self, i: int) -> "TimeSeries":
        label = (self.labels[i],) if self.labels else None
        return TimeSeries(self.data[:, i : i + 1], label)

    def select(self, idx) -> "TimeSeries":
        idx = list(idx)
        labels = tuple(self.labels[i] for i in idx) if self.labels else None
        return TimeSeries(self.data[:, idx], labels)

    def split(self, m: int) -> tuple["TimeSeries", "TimeSeries"]:
        """First m channels and the rest, as two series."""
        return self.select(range(m)), self.select(range(m, self.channels))

    def drop_head(self, n: int) -> "TimeSeries":
        if n >= self.length:
            raise ValueError("cannot drop the entire series")
        return TimeSeries(self.data[n:], self.labels)

    def __repr__(self) -> str:
        return f"TimeSeries(length={self.length}, channels={self.channels})"


@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal-covariance Gaussian white noise specification."""

    dim: int
    variance: tuple[float, ...] = field(default=(1.0,))
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        var = np.atleast_1d(np.asarray(self.variance, dtype=float))
        if var.size == 1:
            var = np.full(self.dim, var[0])
        if var.size != self.dim:
            raise ValueError("variance must be scalar or one entry per channel")
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "variance", tuple(var))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def with_seed(self, seed: int) -> "NoiseSpec":
        return NoiseSpec(self.dim, self.variance, seed)


def generate_white_noise(spec: NoiseSpec, length: int) -> TimeSeries:
    """I.i.d. zero-mean Gaussian samples, deterministic given the seed."""
    if length < 1:
        raise ValueError("length must be positive")
    rng = np.random.Generator(np.random.Philox(key=int(spec.seed)))
    u1 = 1.0 - rng.random((length, spec.dim))  # (0, 1], keeps log finite
    u2 = rng.random((length, spec.dim))
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    z *= np.sqrt(np.asarray(spec.variance))
    return TimeSeries(z, tuple(f"e{i + 1}" for i in range(spec.dim)))


def _denominator_is_diagonal(g: RationalTransferMatrix) -> bool:
    c = g.denom.coeffs
    off = c.copy()
    n = g.out_dim
    off[:, np.arange(n), np.arange(n)] = 0.0
    return not off.any()


def _filter_diagonal(g: RationalTransferMatrix, x: np.ndarray) -> np.ndarray:
    out = np.empty((x.shape[0], g.out_dim))
    for i in range(g.out_dim):
        drive = np.zeros(x.shape[0])
        for j in range(g.in_dim):
            b = g.numer.coeffs[:, i, j]
            if b.any():
                drive += lfilter(b, [1.0], x[:, j])
        out[:, i] = lfilter([1.0], g.denom.coeffs[:, i, i], drive)
    return out


def _filter_general(g: RationalTransferMatrix, x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    num = g.numer.coeffs
    den = g.denom.coeffs
    drive = np.zeros((n, g.out_dim))
    for k in range(num.shape[0]):
        if num[k].any():
            drive[k:] += x[: n - k] @ num[k].T
    y = np.empty((n, g.out_dim))
    da = den.shape[0] - 1
    for t in range(n):
        acc = drive[t].copy()
        for k in range(1, min(da, t) + 1):
            acc -= den[k] @ y[t - k]
        y[t] = acc
    return y


def filter_series(g: RationalTransferMatrix, x: TimeSeries) -> TimeSeries:
    """Run the causal recursion denom * y = numer * x from zero initial state.

    Unstable transfers are allowed (a warning is emitted): open-loop
    instability is legitimate inside a stable feedback loop.
    """
    if g.in_dim != x.channels:
        raise ValueError(f"transfer expects {g.in_dim} input channels, series has {x.channels}")
    warn_if_unstable(g, "filter transfer")
    if _denominator_is_diagonal(g):
        y = _filter_diagonal(g, x.data)
    else:
        y = _filter_general(g, x.data)
    return TimeSeries(y)


def simulate_low_rank(w: RationalTransferMatrix, e_spec: NoiseSpec, length: int) -> TimeSeries:
    """Drive a tall (m+p) x m spectral factor with white noise.

    The first m output channels form the full-rank block, the remaining p
    channels are deterministically related to them.
    """
    if not stability_report(w).is_stable:
        raise ValueError("spectral factor must be strictly stable")
    if e_spec.dim != w.in_dim:
        raise ValueError(f"noise dimension {e_spec.dim} does not match factor input {w.in_dim}")
    e = generate_white_noise(e_spec, length)
    y = filter_series(w, e)
    return TimeSeries(y.data, tuple(f"y{i + 1}" for i in range(w.out_dim)))


def _check_normalized(k: RationalTransferMatrix) -> None:
    n0 = k.numer.constant_coefficient()
    m = k.in_dim
    if k.out_dim % m != 0:
        raise ValueError("noise shaping factor must stack m x m blocks")
    for b in range(k.out_dim // m):
        if np.abs(n0[b * m : (b + 1) * m] - np.eye(m)).max() > 1e-9:
            raise ValueError("noise shaping factor must be normalized to identity at infinity")


def simulate_with_input(
    f: RationalTransferMatrix,
    k: RationalTransferMatrix,
    u: TimeSeries,
    e_spec: NoiseSpec,
) -> TimeSeries:
    """Simulate y = f * u + k * e with an independent noise stream e."""
    if f.in_dim != u.channels:
        raise ValueError(f"input transfer expects {f.in_dim} channels, input has {u.channels}")
    if e_spec.dim != k.in_dim:
        raise ValueError(f"noise dimension {e_spec.dim} does not match shaping input {k.in_dim}")
    if f.out_dim != k.out_dim:
        raise ValueError("input and noise paths must share the output dimension")
    _check_normalized(k)
    warn_if_unstable(f, "input transfer")
    warn_if_unstable(k, "noise shaping transfer")
    e = generate_white_noise(e_spec, u.length)
    y = filter_series(f, u).data + filter_series(k, e).data
    return TimeSeries(y, tuple(f"y{i + 1}" for i in range(f.out_dim)))


# -- CSV interchange ----------------------------------------------------------


def write_timeseries_csv(ts: TimeSeries, path, comments: tuple[str, ...] = ()) -> None:
    """Header t,ch1,... and 17-significant-digit decimals (bit-exact round trip)."""
    labels = ts.labels or tuple(f"ch{i + 1}" for i in range(ts.channels))
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("t," + ",".join(labels) + "\n")
        for t in range(ts.length):
            row = ",".join(f"{v:.17g}" for v in ts.data[t])
            fh.write(f"{t},{row}\n")


def read_timeseries_csv(path) -> TimeSeries:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    header = lines[0].split(",")
    if header[0] != "t":
        raise ValueError(f"{path}: expected a 't' column first, got {header[0]!r}")
    labels = tuple(header[1:])
    data = np.array([[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]])
    return TimeSeries(data, labels)
