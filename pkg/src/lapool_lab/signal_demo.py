"""Energy preservation of Laplacian-maxima vs -minima downsampling on a 1-D path graph.

A signal is sampled at the k nodes ranked highest (or lowest) by |L y| plus
both endpoints, linearly interpolated back to all n nodes, and the
energy gap E(y) - E(reconstruction) is recorded, with E(y) = sum y_i^2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .pooling import signal_variation

MODES = ("laplacian_max", "laplacian_min")


@dataclass(frozen=True)
class Signal1D:
    samples: np.ndarray
    terms: int = 0
    noise_sd: float = 0.0
    smoothing_passes: int = 0
    seed: int | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if s.size < 2:
            raise ValueError("a signal needs at least 2 samples")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.size


def path_graph(n: int) -> Graph:
    A = np.zeros((n, n))
    i = np.arange(n - 1)
    A[i, i + 1] = A[i + 1, i] = 1.0
    return Graph(node_features=np.zeros((n, 1)), adjacency=A)


def generate_signal(n: int, terms: int = 8, noise_sd: float = 0.0, seed: int = 0, coefficients=None) -> Signal1D:
    """Random Fourier series sum_k a_k sin(2 pi k t / n) + b_k cos(2 pi k t / n) plus noise.

    ``coefficients`` = (a, b), each of length ``terms``, overrides the standard
    normal draws.
    """
    if terms < 0:
        raise ValueError("terms must be non-negative")
    rng = np.random.default_rng(seed)
    if coefficients is None:
        a = rng.standard_normal(terms)
        b = rng.standard_normal(terms)
    else:
        a, b = (np.asarray(c, dtype=np.float64).reshape(-1) for c in coefficients)
        if a.size != terms or b.size != terms:
            raise ValueError("coefficient arrays must have length `terms`")
    t = np.arange(n)
    k = np.arange(1, terms + 1)[:, None]
    phase = 2.0 * np.pi * k * t[None, :] / n
    y = a @ np.sin(phase) + b @ np.cos(phase) if terms else np.zeros(n)
    if noise_sd > 0:
        y = y + rng.normal(0.0, noise_sd, size=n)
    return Signal1D(y, terms, noise_sd, 0, seed)


def smooth(sig: Signal1D, passes: int = 2) -> Signal1D:
    """Repeated 3-point neighbour averaging; endpoints average the two values they have."""
    if passes < 0:
        raise ValueError("passes must be >= 0")
    y = sig.samples.copy()
    for _ in range(passes):
        padded_sum = y.copy()
        padded_sum[1:] += y[:-1]
        padded_sum[:-1] += y[1:]
        counts = np.full(y.size, 3.0)
        counts[0] = counts[-1] = 2.0
        y = padded_sum / counts
    return Signal1D(y, sig.terms, sig.noise_sd, sig.smoothing_passes + passes, sig.seed)


def energy(y) -> float:
    y = np.asarray(y, dtype=np.float64)
    return float(np.sum(np.abs(y) ** 2))


def select_samples(y: np.ndarray, mode: str, k: int) -> np.ndarray:
    """The k nodes with largest/smallest |L y| (smaller index wins ties), plus both endpoints."""
    n = y.size
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    S = signal_variation(path_graph(n), y[:, None])
    key = -S if mode == "laplacian_max" else S
    picked = np.lexsort((np.arange(n), key))[:k]
    return np.union1d(picked, [0, n - 1])


def downsample_reconstruct(sig: Signal1D | np.ndarray, mode: str, k: int):
    """Returns ``(selected indices, reconstruction, delta_E)``."""
    y = sig.samples if isinstance(sig, Signal1D) else np.asarray(sig, dtype=np.float64).reshape(-1)
    idx = select_samples(y, mode, k)
    recon = np.interp(np.arange(y.size), idx, y[idx])
    return idx, recon, energy(y) - energy(recon)


@dataclass(frozen=True)
class DemoConfig:
    n: int = 25
    terms: int = 8
    noise_sd: float = 0.2
    smoothing_passes: int = 2
    seeds: int = 100
    seed_offset: int = 0
    ks: tuple[int, ...] = field(default_factory=lambda: (math.ceil(25 / 3),))

    def __post_init__(self):
        if self.n < 8 or self.seeds < 1 or not self.ks:
            raise ValueError("need n >= 8, at least one seed and one k")
        if any(not 1 <= k <= self.n for k in self.ks):
            raise ValueError(f"every k must lie in [1, {self.n}]")


def run_demo(config: DemoConfig) -> dict:
    """Trials over seeds x k; per-trial energies for both modes and max-mode win rates."""
    rows = []
    wins: dict[int, int] = {k: 0 for k in config.ks}
    for s in range(config.seed_offset, config.seed_offset + config.seeds):
        sig = smooth(generate_signal(config.n, config.terms, config.noise_sd, s), config.smoothing_passes)
        e_orig = energy(sig.samples)
        for k in config.ks:
            gaps = {}
            for mode in MODES:
                _, recon, delta = downsample_reconstruct(sig, mode, k)
                gaps[mode] = abs(delta)
                rows.append(
                    {"seed": s, "k": k, "mode": mode, "E_orig": e_orig, "E_recon": energy(recon), "delta_E": delta}
                )
            wins[k] += gaps["laplacian_max"] < gaps["laplacian_min"]
    summary = {}
    for k in config.ks:
        abs_max = [abs(r["delta_E"]) for r in rows if r["k"] == k and r["mode"] == "laplacian_max"]
        abs_min = [abs(r["delta_E"]) for r in rows if r["k"] == k and r["mode"] == "laplacian_min"]
        summary[str(k)] = {
            "max_win_rate": wins[k] / config.seeds,
            "median_abs_delta_max": float(np.median(abs_max)),
            "median_abs_delta_min": float(np.median(abs_min)),
        }
    return {"rows": rows, "summary": summary}


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["seed", "k", "mode", "E_orig", "E_recon", "delta_E"], lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({**r, **{c: repr(float(r[c])) for c in ("E_orig", "E_recon", "delta_E")}})
    return buf.getvalue()
