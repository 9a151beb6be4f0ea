"""Declarative experiment runner: JSON configs for simulate/identify/report pipelines.

A config names a true system (as matrix-fraction coefficient lists in
ascending powers of z^-1), noise variances, lengths and fit orders; the
runner simulates data, runs the mode-appropriate estimators, and writes
deterministic CSV/JSON artifacts (time series, fit reports, Bode grids).
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .identify import (
    ArmaxOrders,
    ChannelOrders,
    EquationErrorWarning,
    FitReport,
    fit_ar,
    fit_deterministic_channel,
    fit_armax_pem,
    fit_input_channel,
    identify_with_input,
)
from .polymat import MatrixPolynomial
from .spectra import (
    check_rank,
    constant_spectrum,
    default_freq_grid,
    spectrum_from_factor,
    spectrum_from_feedback,
)
from .timeseries import (
    INPUT_STREAM_OFFSET,
    NoiseSpec,
    TimeSeries,
    generate_white_noise,
    read_timeseries_csv,
    simulate_low_rank,
    simulate_with_input,
    write_timeseries_csv,
)
from .transfer import (
    RationalTransferMatrix,
    frequency_response,
    rtm_identity,
    rtm_inverse,
    rtm_mul,
    rtm_sub,
    rtm_vstack,
)

__all__ = [
    "ConfigError",
    "MfdSpec",
    "ExperimentConfig",
    "RunReport",
    "parse_config",
    "write_config",
    "run_experiment",
    "export_bode",
    "export_spectrum_csv",
]

MODES = ("low_rank_timeseries", "with_input", "spectrum_check")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _ctx(path: str, msg: str) -> ConfigError:
    return ConfigError(f"{path}: {msg}")


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise _ctx(path, f"missing required field '{key}'")
    return d[key]


@dataclass(frozen=True)
class MfdSpec:
    """Coefficient lists (ascending powers of z^-1) of one matrix fraction."""

    numer: tuple
    denom: tuple

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "MfdSpec":
        if not isinstance(d, dict):
            raise _ctx(path, "expected an object with 'numer' and 'denom'")
        numer = _require(d, "numer", path)
        denom = _require(d, "denom", path)
        for name, coeffs in (("numer", numer), ("denom", denom)):
            if not isinstance(coeffs, list) or not coeffs:
                raise _ctx(f"{path}.{name}", "expected a non-empty coefficient list")
        return cls(numer=_freeze(numer), denom=_freeze(denom))

    def build(self) -> RationalTransferMatrix:
        return RationalTransferMatrix(
            MatrixPolynomial(np.asarray(_thaw(self.denom), dtype=float)),
            MatrixPolynomial(np.asarray(_thaw(self.numer), dtype=float)),
        )

    def to_dict(self) -> dict:
        return {"numer": _thaw(self.numer), "denom": _thaw(self.denom)}


def _freeze(x):
    return tuple(_freeze(v) for v in x) if isinstance(x, list) else x


def _thaw(x):
    return [_thaw(v) for v in x] if isinstance(x, tuple) else x


def _channel_orders(d: dict, path: str) -> ChannelOrders:
    try:
        return ChannelOrders(
            na=int(_require(d, "na", path)),
            nb=int(_require(d, "nb", path)),
            delay=int(d.get("delay", 0)),
        )
    except ValueError as exc:
        raise _ctx(path, str(exc)) from exc


def _armax_orders(d: dict, path: str) -> ArmaxOrders:
    try:
        nb = d.get("nb")
        return ArmaxOrders(
            na=int(_require(d, "na", path)),
            nb=None if nb is None else int(nb),
            nc=int(_require(d, "nc", path)),
            delay=int(d.get("delay", 1)),
        )
    except ValueError as exc:
        raise _ctx(path, str(exc)) from exc


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    length: int
    seeds: tuple[int, ...]
    noise_variance: tuple[float, ...]
    transient: int = 50
    freq_points: int = 512
    input_variance: tuple[float, ...] | None = None
    w_channels: tuple[MfdSpec, ...] | None = None
    split: int | None = None
    h_true: MfdSpec | None = None
    f_channels: tuple[MfdSpec, ...] | None = None
    k_channels: tuple[MfdSpec, ...] | None = None
    loop_f: MfdSpec | None = None
    loop_k: MfdSpec | None = None
    ar_orders: tuple[int, ...] | None = None
    channel_orders: ChannelOrders | None = None
    armax_orders: ArmaxOrders | None = None
    input_orders: tuple[ChannelOrders, ...] | None = None
    k_fit_orders: tuple[ArmaxOrders, ...] | None = None
    rerun_channel: int | None = None
    rerun_orders: ChannelOrders | None = None
    out_dir: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {self.mode!r}")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if self.mode != "spectrum_check" and self.length <= self.transient:
            raise ConfigError(
                f"length: must exceed the transient discard ({self.length} <= {self.transient})"
            )

    # -- construction of model objects ------------------------------------

    def build_w(self) -> RationalTransferMatrix:
        if not self.w_channels:
            raise ConfigError("model.w: required for this mode")
        return rtm_vstack([spec.build() for spec in self.w_channels])

    def build_f(self) -> RationalTransferMatrix:
        if not self.f_channels:
            raise ConfigError("model.f: required for this mode")
        return rtm_vstack([spec.build() for spec in self.f_channels])

    def build_k(self) -> RationalTransferMatrix:
        if not self.k_channels:
            raise ConfigError("model.k: required for this mode")
        return rtm_vstack([spec.build() for spec in self.k_channels])

    def to_dict(self) -> dict:
        model: dict = {}
        if self.w_channels:
            model["w"] = [s.to_dict() for s in self.w_channels]
        if self.split is not None:
            model["split"] = self.split
        if self.h_true is not None:
            model["h"] = self.h_true.to_dict()
        if self.f_channels:
            model["f"] = [s.to_dict() for s in self.f_channels]
        if self.k_channels:
            model["k"] = [s.to_dict() for s in self.k_channels]
        if self.loop_f is not None or self.loop_k is not None:
            model["loop"] = {}
            if self.loop_f is not None:
                model["loop"]["f"] = self.loop_f.to_dict()
            if self.loop_k is not None:
                model["loop"]["k"] = self.loop_k.to_dict()
        fits: dict = {}
        if self.ar_orders is not None:
            fits["ar_orders"] = list(self.ar_orders)
        if self.channel_orders is not None:
            o = self.channel_orders
            fits["channel"] = {"na": o.na, "nb": o.nb, "delay": o.delay}
        if self.armax_orders is not None:
            o = self.armax_orders
            fits["armax"] = {"na": o.na, "nb": o.nb, "nc": o.nc, "delay": o.delay}
        if self.input_orders is not None:
            fits["input_channels"] = [
                {"na": o.na, "nb": o.nb, "delay": o.delay} for o in self.input_orders
            ]
        if self.k_fit_orders is not None:
            fits["k_channels"] = [{"na": o.na, "nc": o.nc} for o in self.k_fit_orders]
        if self.rerun_channel is not None:
            o = self.rerun_orders
            fits["rerun"] = {
                "channel": self.rerun_channel,
                "orders": {"na": o.na, "nb": o.nb, "delay": o.delay},
            }
        out = {
            "mode": self.mode,
            "length": self.length,
            "transient": self.transient,
            "seeds": list(self.seeds),
            "freq_points": self.freq_points,
            "noise": {"variance": list(self.noise_variance)},
            "model": model,
            "fits": fits,
        }
        if self.input_variance is not None:
            out["input_noise"] = {"variance": list(self.input_variance)}
        if self.out_dir is not None:
            out["out_dir"] = self.out_dir
        return out

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _parse_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    mode = _require(raw, "mode", "top level")
    length = int(_require(raw, "length", "top level"))
    seeds = _require(raw, "seeds", "top level")
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds: expected a list of integers")
    noise = _require(raw, "noise", "top level")
    variance = _require(noise, "variance", "noise")
    model = _require(raw, "model", "top level")
    fits = raw.get("fits", {})

    kwargs: dict = dict(
        mode=mode,
        length=length,
        seeds=tuple(seeds),
        noise_variance=tuple(float(v) for v in variance),
        transient=int(raw.get("transient", 50)),
        freq_points=int(raw.get("freq_points", 512)),
        out_dir=raw.get("out_dir"),
    )
    if "input_noise" in raw:
        kwargs["input_variance"] = tuple(
            float(v) for v in _require(raw["input_noise"], "variance", "input_noise")
        )
    if "w" in model:
        kwargs["w_channels"] = tuple(
            MfdSpec.from_dict(d, f"model.w[{i}]") for i, d in enumerate(model["w"])
        )
    if "split" in model:
        kwargs["split"] = int(model["split"])
    if "h" in model:
        kwargs["h_true"] = MfdSpec.from_dict(model["h"], "model.h")
    if "f" in model:
        kwargs["f_channels"] = tuple(
            MfdSpec.from_dict(d, f"model.f[{i}]") for i, d in enumerate(model["f"])
        )
    if "k" in model:
        kwargs["k_channels"] = tuple(
            MfdSpec.from_dict(d, f"model.k[{i}]") for i, d in enumerate(model["k"])
        )
    if "loop" in model:
        loop = model["loop"]
        if "f" in loop:
            kwargs["loop_f"] = MfdSpec.from_dict(loop["f"], "model.loop.f")
        if "k" in loop:
            kwargs["loop_k"] = MfdSpec.from_dict(loop["k"], "model.loop.k")
    if "ar_orders" in fits:
        kwargs["ar_orders"] = tuple(int(v) for v in fits["ar_orders"])
    if "channel" in fits:
        kwargs["channel_orders"] = _channel_orders(fits["channel"], "fits.channel")
    if "armax" in fits:
        kwargs["armax_orders"] = _armax_orders(fits["armax"], "fits.armax")
    if "input_channels" in fits:
        spec = fits["input_channels"]
        if isinstance(spec, dict):
            spec = [spec]
        kwargs["input_orders"] = tuple(
            _channel_orders(d, f"fits.input_channels[{i}]") for i, d in enumerate(spec)
        )
    if "k_channels" in fits:
        spec = fits["k_channels"]
        if isinstance(spec, dict):
            spec = [spec]
        kwargs["k_fit_orders"] = tuple(
            _armax_orders({"nb": None, **d}, f"fits.k_channels[{i}]") for i, d in enumerate(spec)
        )
    if "rerun" in fits:
        rerun = fits["rerun"]
        kwargs["rerun_channel"] = int(_require(rerun, "channel", "fits.rerun"))
        kwargs["rerun_orders"] = _channel_orders(
            _require(rerun, "orders", "fits.rerun"), "fits.rerun.orders"
        )
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment config, with field diagnostics."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{path}: no such file")
    text = p.read_text()
    if not text.strip():
        raise ConfigError(f"{path}: empty file")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    return _parse_dict(raw)


def write_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


# -- exports -------------------------------------------------------------------


def export_bode(g: RationalTransferMatrix, grid: np.ndarray, path, comments=()) -> None:
    """CSV of magnitude (dB) and phase (degrees) per matrix entry."""
    resp = frequency_response(g, grid)
    cols = []
    names = []
    with np.errstate(divide="ignore"):
        for i in range(g.out_dim):
            for j in range(g.in_dim):
                names.append(f"mag_db_{i + 1}{j + 1}")
                names.append(f"phase_deg_{i + 1}{j + 1}")
                cols.append(20.0 * np.log10(np.abs(resp[:, i, j])))
                cols.append(np.angle(resp[:, i, j]) * 180.0 / np.pi)
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("theta," + ",".join(names) + "\n")
        for r in range(len(grid)):
            vals = ",".join(f"{c[r]:.17g}" for c in cols)
            fh.write(f"{grid[r]:.17g},{vals}\n")


def export_spectrum_csv(phi, path, comments=()) -> None:
    """CSV of Re/Im of every spectral matrix entry per frequency."""
    names = []
    for i in range(phi.dim):
        for j in range(phi.dim):
            names.append(f"re_{i + 1}{j + 1}")
            names.append(f"im_{i + 1}{j + 1}")
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("theta," + ",".join(names) + "\n")
        for r in range(phi.n_freqs):
            vals = []
            for i in range(phi.dim):
                for j in range(phi.dim):
                    vals.append(f"{phi.values[r, i, j].real:.17g}")
                    vals.append(f"{phi.values[r, i, j].imag:.17g}")
            fh.write(f"{phi.freqs[r]:.17g}," + ",".join(vals) + "\n")


# -- run reports ----------------------------------------------------------------


@dataclass
class RunReport:
    """All per-seed fit outcomes plus cross-seed summary statistics."""

    mode: str
    config_hash: str
    seeds: list[int]
    replications: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "replications": self.replications,
            "summary": self.summary,
        }


def _poly_list(p: MatrixPolynomial) -> list:
    if p.shape == (1, 1):
        return [float(v) for v in p.coeffs[:, 0, 0]]
    return [[[float(v) for v in row] for row in mat] for mat in p.coeffs]


def _fit_dict(rep: FitReport) -> dict:
    out = {
        "residual_rms": rep.residual_rms,
        "condition_number": rep.condition_number,
        "converged": rep.converged,
        "rank_deficient": rep.rank_deficient,
    }
    if rep.cost_history:
        out["cost_history"] = [float(c) for c in rep.cost_history]
    if rep.noise_variance is not None:
        nv = np.asarray(rep.noise_variance, dtype=float)
        out["noise_variance"] = float(nv) if nv.ndim == 0 else nv.tolist()
    if rep.polynomials:
        out["coefficients"] = {k: _poly_list(v) for k, v in rep.polynomials.items()}
    return out


def _bode_max_dev_db(g_est, g_true, grid, keep_fraction=1.0) -> float:
    est = np.abs(frequency_response(g_est, grid))
    ref = np.abs(frequency_response(g_true, grid))
    n = int(len(grid) * keep_fraction)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = 20.0 * np.abs(np.log10(est[:n]) - np.log10(ref[:n]))
    return float(np.nanmax(dev))


def _summarize(replications: list[dict]) -> dict:
    """Median and interquartile range of every scalar metric across seeds."""
    keys: dict[str, list[float]] = {}
    for rep in replications:
        for k, v in rep.get("metrics", {}).items():
            if isinstance(v, (int, float)) and np.isfinite(v):
                keys.setdefault(k, []).append(float(v))
    out = {}
    for k, vals in keys.items():
        arr = np.asarray(vals)
        out[k] = {
            "median": float(np.median(arr)),
            "q1": float(np.percentile(arr, 25)),
            "q3": float(np.percentile(arr, 75)),
            "n": len(vals),
        }
    return out


# -- single-seed pipelines -------------------------------------------------------


def _artifact_comments(cfg: ExperimentConfig, seed: int) -> tuple[str, ...]:
    return (f"seed={seed}", f"config_sha256={cfg.config_hash()}")


def _run_low_rank(cfg: ExperimentConfig, seed: int, out: Path, grid) -> dict:
    w = cfg.build_w()
    m = cfg.split if cfg.split is not None else w.in_dim
    y = simulate_low_rank(w, NoiseSpec(w.in_dim, cfg.noise_variance, seed), cfg.length)
    write_timeseries_csv(y, out / "timeseries_y.csv", _artifact_comments(cfg, seed))
    trimmed = y.drop_head(cfg.transient)
    y1, y2 = trimmed.split(m)
    comments = _artifact_comments(cfg, seed)

    fits: dict = {}
    metrics: dict = {}
    w_hats = []
    if cfg.ar_orders:
        for i, order in enumerate(cfg.ar_orders):
            rep = fit_ar(trimmed.channel(i), order)
            fits[f"ar_w{i + 1}"] = _fit_dict(rep)
            w_hats.append(rep.estimate)
            true_ch = cfg.w_channels[i].build()
            export_bode(true_ch, grid, out / f"bode_w{i + 1}_true.csv", comments)
            export_bode(rep.estimate, grid, out / f"bode_w{i + 1}_hat.csv", comments)
            metrics[f"w{i + 1}_bode_max_dev_db"] = _bode_max_dev_db(rep.estimate, true_ch, grid)

    h_hat = None
    if cfg.channel_orders is not None:
        rep = fit_deterministic_channel(y1, y2, cfg.channel_orders)
        h_hat = rep.estimate
        fits["deterministic_channel"] = _fit_dict(rep)
        export_bode(h_hat, grid, out / "bode_h_hat.csv", comments)
        if cfg.h_true is not None:
            h_true = cfg.h_true.build()
            export_bode(h_true, grid, out / "bode_h_true.csv", comments)
            metrics["h_bode_max_dev_db"] = _bode_max_dev_db(h_hat, h_true, grid)
        if w_hats:
            w2_prime = rtm_mul(h_hat, w_hats[0])
            export_bode(w2_prime, grid, out / "bode_w2_prime.csv", comments)
            metrics["w2_prime_bode_max_dev_db"] = _bode_max_dev_db(
                w2_prime, cfg.w_channels[1].build(), grid
            )

    if cfg.armax_orders is not None and m == 1 and y2.channels == 1:
        rep = fit_armax_pem(y1, y2, cfg.armax_orders)
        fits["armax"] = _fit_dict(rep)
        metrics["pem_variance"] = float(np.asarray(rep.noise_variance))
        model = rep.estimate
        export_bode(model.f, grid, out / "bode_f_hat.csv", comments)
        export_bode(model.k, grid, out / "bode_k_hat.csv", comments)
        if h_hat is not None:
            w1_prime = rtm_mul(
                rtm_inverse(rtm_sub(rtm_identity(1), rtm_mul(model.f, h_hat))), model.k
            )
            export_bode(w1_prime, grid, out / "bode_w1_prime.csv", comments)
            if w_hats:
                metrics["w1_prime_vs_w1_hat_low80_db"] = _bode_max_dev_db(
                    w1_prime, w_hats[0], grid, keep_fraction=0.8
                )
    return {"seed": seed, "fits": fits, "metrics": metrics}


def _residual_rank_ratio(resid: TimeSeries, grid) -> float:
    """Second-to-first singular value ratio of a fitted VAR spectrum of the residual."""
    order = max(2, min(8, resid.length // (10 * resid.channels**2 * 2)))
    rep = fit_ar(resid, order)
    a_resp = frequency_response(rep.estimate, grid)  # (I + sum A_k x^k)^-1
    phi = a_resp @ np.asarray(rep.noise_variance) @ a_resp.conj().transpose(0, 2, 1)
    sv = np.linalg.svd(phi, compute_uv=False)
    return float(np.mean(sv[:, 1] / sv[:, 0]))


def _run_with_input(cfg: ExperimentConfig, seed: int, out: Path, grid) -> dict:
    f = cfg.build_f()
    k = cfg.build_k()
    if cfg.input_variance is None:
        raise ConfigError("input_noise: required for mode with_input")
    u = generate_white_noise(
        NoiseSpec(f.in_dim, cfg.input_variance, seed + INPUT_STREAM_OFFSET), cfg.length
    )
    y = simulate_with_input(f, k, u, NoiseSpec(k.in_dim, cfg.noise_variance, seed))
    comments = _artifact_comments(cfg, seed)
    write_timeseries_csv(y, out / "timeseries_y.csv", comments)
    write_timeseries_csv(u, out / "timeseries_u.csv", comments)

    if cfg.input_orders is None or cfg.k_fit_orders is None:
        raise ConfigError("fits.input_channels and fits.k_channels: required for mode with_input")
    input_orders = list(cfg.input_orders)
    if len(input_orders) == 1:
        input_orders *= y.channels
    k_orders = list(cfg.k_fit_orders)
    if len(k_orders) == 1:
        k_orders *= y.channels

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EquationErrorWarning)
        result = identify_with_input(
            y.drop_head(cfg.transient), u.drop_head(cfg.transient), input_orders, k_orders
        )
    fits = {"input_channel": _fit_dict(result.f_report)}
    metrics: dict = {"degenerate": float(result.degenerate)}
    b0 = result.f_hat.numer.coeffs
    if b0.shape[0] > 1:
        metrics["f1_leading_coefficient"] = float(b0[1, 0, 0])
    for i in range(y.channels):
        true_ch = cfg.f_channels[i].build()
        export_bode(true_ch, grid, out / f"bode_f{i + 1}_true.csv", comments)
    export_bode(result.f_hat, grid, out / "bode_f_hat.csv", comments)
    metrics["f_bode_max_dev_db"] = _bode_max_dev_db(result.f_hat, f, grid)

    if not result.degenerate:
        write_timeseries_csv(result.residual, out / "timeseries_residual.csv", comments)
        metrics["residual_rank_ratio"] = _residual_rank_ratio(
            result.residual.drop_head(32), grid
        )
        for i, rep in enumerate(result.k_reports):
            fits[f"k{i + 1}"] = _fit_dict(rep)
            true_k = cfg.k_channels[i].build()
            export_bode(true_k, grid, out / f"bode_k{i + 1}_true.csv", comments)
            export_bode(rep.estimate.k, grid, out / f"bode_k{i + 1}_hat.csv", comments)
            metrics[f"k{i + 1}_bode_max_dev_db"] = _bode_max_dev_db(
                rep.estimate.k, true_k, grid
            )
    if cfg.rerun_channel is not None:
        ch = cfg.rerun_channel
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EquationErrorWarning)
            rerun = fit_input_channel(
                y.drop_head(cfg.transient).channel(ch),
                u.drop_head(cfg.transient),
                cfg.rerun_orders,
            )
        fits[f"rerun_f{ch + 1}"] = _fit_dict(rerun)
        true_b = cfg.f_channels[ch].build().numer.scalar_coefficients()
        est_b = rerun.estimate.numer.scalar_coefficients()
        n = max(len(true_b), len(est_b))
        tb = np.zeros(n)
        eb = np.zeros(n)
        tb[: len(true_b)] = true_b
        eb[: len(est_b)] = est_b
        metrics["rerun_coeff_max_error"] = float(np.abs(tb - eb).max())
    return {"seed": seed, "fits": fits, "metrics": metrics}


def _run_spectrum_check(cfg: ExperimentConfig, seed: int, out: Path, grid) -> dict:
    w = cfg.build_w()
    phi = spectrum_from_factor(w, cfg.noise_variance, grid)
    comments = _artifact_comments(cfg, seed)
    export_spectrum_csv(phi, out / "spectrum.csv", comments)
    export_bode(w, grid, out / "bode_w.csv", comments)
    report = check_rank(phi)
    metrics: dict = {
        "rank": float(report.rank),
        "rank_constant_over_grid": float(np.all(report.per_frequency == report.rank)),
    }
    if cfg.loop_f is not None and cfg.loop_k is not None and cfg.h_true is not None:
        f = cfg.loop_f.build()
        h = cfg.h_true.build()
        k = cfg.loop_k.build()
        phi_v = spectrum_from_factor(k, cfg.noise_variance, grid)
        phi_r = constant_spectrum(np.zeros((h.out_dim, h.out_dim)), grid)
        phi_fb = spectrum_from_feedback(f, h, phi_v, phi_r)
        metrics["feedback_vs_factor_max_dev"] = float(
            np.abs(phi_fb.values - phi.values).max()
        )
        # brute-force reference: invert the loop equations pointwise
        m, p = f.shape
        n_mat = np.zeros((len(grid), m + p, m + p), dtype=complex)
        n_mat[:, :m, :m] = np.eye(m)
        n_mat[:, m:, m:] = np.eye(p)
        n_mat[:, :m, m:] = -frequency_response(f, grid)
        n_mat[:, m:, :m] = -frequency_response(h, grid)
        t_bf = np.linalg.inv(n_mat)
        mid = np.zeros_like(n_mat)
        mid[:, :m, :m] = phi_v.values
        mid[:, m:, m:] = phi_r.values
        phi_bf = t_bf @ mid @ t_bf.conj().transpose(0, 2, 1)
        metrics["feedback_vs_bruteforce_max_dev"] = float(
            np.abs(phi_fb.values - phi_bf).max()
        )
    return {"seed": seed, "fits": {}, "metrics": metrics}


def run_experiment(
    cfg: ExperimentConfig,
    out_dir=None,
    seeds=None,
    freq_points: int | None = None,
    replications: int | None = None,
) -> RunReport:
    """Execute the configured pipeline for every seed and write artifacts.

    Outputs are deterministic functions of the config and seeds: rerunning
    produces byte-identical files. With `replications`, seeds are derived
    from the first configured seed by consecutive offsets.
    """
    out = Path(out_dir if out_dir is not None else (cfg.out_dir or "runs"))
    out.mkdir(parents=True, exist_ok=True)
    run_seeds = list(seeds if seeds is not None else cfg.seeds)
    if replications is not None:
        run_seeds = [run_seeds[0] + i for i in range(replications)]
    grid = default_freq_grid(freq_points if freq_points is not None else cfg.freq_points)
    runner = {
        "low_rank_timeseries": _run_low_rank,
        "with_input": _run_with_input,
        "spectrum_check": _run_spectrum_check,
    }[cfg.mode]
    report = RunReport(mode=cfg.mode, config_hash=cfg.config_hash(), seeds=run_seeds)
    for seed in run_seeds:
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        report.replications.append(runner(cfg, seed, seed_dir, grid))
    report.summary = _summarize(report.replications)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report


def identify_from_csv(cfg: ExperimentConfig, data_path, input_path=None, out_dir=None) -> RunReport:
    """Run only the identification stage on previously written CSV series."""
    y = read_timeseries_csv(data_path)
    out = Path(out_dir if out_dir is not None else (cfg.out_dir or "runs"))
    out.mkdir(parents=True, exist_ok=True)
    grid = default_freq_grid(cfg.freq_points)
    seed = cfg.seeds[0]
    seed_dir = out / f"seed_{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    report = RunReport(mode=cfg.mode, config_hash=cfg.config_hash(), seeds=[seed])
    trimmed = y.drop_head(cfg.transient) if y.length > cfg.transient else y
    if cfg.mode == "low_rank_timeseries":
        m = cfg.split if cfg.split is not None else 1
        y1, y2 = trimmed.split(m)
        fits = {}
        metrics: dict = {}
        if cfg.ar_orders:
            for i, order in enumerate(cfg.ar_orders):
                fits[f"ar_w{i + 1}"] = _fit_dict(fit_ar(trimmed.channel(i), order))
        if cfg.channel_orders is not None:
            fits["deterministic_channel"] = _fit_dict(
                fit_deterministic_channel(y1, y2, cfg.channel_orders)
            )
        if cfg.armax_orders is not None and m == 1 and y2.channels == 1:
            rep = fit_armax_pem(y1, y2, cfg.armax_orders)
            fits["armax"] = _fit_dict(rep)
            metrics["pem_variance"] = float(np.asarray(rep.noise_variance))
        report.replications.append({"seed": seed, "fits": fits, "metrics": metrics})
    elif cfg.mode == "with_input":
        if input_path is None:
            raise ConfigError("mode with_input requires --input with the input series CSV")
        u = read_timeseries_csv(input_path)
        u = u.drop_head(cfg.transient) if u.length > cfg.transient else u
        input_orders = list(cfg.input_orders or ())
        if len(input_orders) == 1:
            input_orders *= y.channels
        k_orders = list(cfg.k_fit_orders or ())
        if len(k_orders) == 1:
            k_orders *= y.channels
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EquationErrorWarning)
            result = identify_with_input(trimmed, u, input_orders, k_orders)
        fits = {"input_channel": _fit_dict(result.f_report)}
        for i, rep in enumerate(result.k_reports):
            fits[f"k{i + 1}"] = _fit_dict(rep)
        report.replications.append(
            {"seed": seed, "fits": fits, "metrics": {"degenerate": float(result.degenerate)}}
        )
    else:
        raise ConfigError(f"mode {cfg.mode}: identification from CSV is not defined")
    report.summary = _summarize(report.replications)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report
