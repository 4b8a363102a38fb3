"""Krylov-chain wavefunction and Krylov complexity.

The operator wavefunction obeys ``d phi / dt = i T phi`` with ``T`` the real
symmetric tridiagonal matrix of Lanczos coefficients and ``phi(0) = e_0``, so
``phi_0(t)`` reproduces the correlator ``C(t) = sum rho exp(-i omega t)``.
Only ``|phi_n|^2`` is physical; the phase convention drops out of everything
computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .lanczos import LanczosData

__all__ = [
    "KrylovEvolution",
    "check_norm",
    "complexity",
    "evolve",
    "max_stable_dt",
    "time_grid",
    "write_complexity_csv",
    "write_phi_csv",
]

DEFAULT_POINTS = 2048


@dataclass(frozen=True)
class KrylovEvolution:
    t_grid: np.ndarray
    phi: np.ndarray          # shape (len(t_grid), K), complex
    c_k: np.ndarray
    norm_drift: float
    method: str

    @property
    def K(self) -> int:
        return self.phi.shape[1]

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.phi) ** 2


def time_grid(t_max: float, dt: float) -> np.ndarray:
    """Uniform grid ``0, dt, ..., t_max``; ``t_max`` is rounded to a whole number of steps."""
    if not dt > 0 or not t_max > 0:
        raise ValueError("t_max and dt must be positive")
    n = int(round(t_max / dt))
    if abs(n * dt - t_max) > 1e-9 * t_max:
        n = int(math.floor(t_max / dt))
    return dt * np.arange(n + 1)


def max_stable_dt(data: LanczosData) -> float:
    scale = max([1.0] + [abs(x) for x in data.a] + list(data.b))
    return 0.1 / scale


def _chain(data: LanczosData, truncate: int | None) -> tuple[np.ndarray, np.ndarray]:
    if truncate is not None:
        data = data.truncated(truncate)
    elif not data.terminated:
        raise ValueError("Lanczos data did not terminate; pass an explicit truncation index")
    return np.asarray(data.a, dtype=float), np.asarray(data.b, dtype=float)


def _tridiag_apply(a, b, v):
    out = a * v
    if b.size:
        out[:-1] += b * v[1:]
        out[1:] += b * v[:-1]
    return out


def _rk4(a, b, t_grid):
    K = a.size
    # T -> T - c I only changes a global phase and keeps the stepping well scaled.
    shift = 0.5 * (a.max() + a.min())
    a_s = a - shift
    dt = t_grid[1] - t_grid[0] if t_grid.size > 1 else 0.0
    x = np.zeros(K)
    y = np.zeros(K)
    x[0] = 1.0
    out = np.empty((t_grid.size, K), dtype=complex)
    out[0] = x + 1j * y

    def f(xv, yv):
        return -_tridiag_apply(a_s, b, yv), _tridiag_apply(a_s, b, xv)

    for k in range(1, t_grid.size):
        k1x, k1y = f(x, y)
        k2x, k2y = f(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y)
        k3x, k3y = f(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y)
        k4x, k4y = f(x + dt * k3x, y + dt * k3y)
        x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        y = y + dt / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        out[k] = x + 1j * y
    return out * np.exp(1j * shift * t_grid)[:, None]


def _eig(a, b, t_grid):
    if a.size == 1:
        return np.exp(1j * a[0] * t_grid)[:, None].astype(complex)
    lam, vecs = eigh_tridiagonal(a, b)
    # phi(t) = V exp(i Lambda t) V^T e_0
    amp = vecs[0]
    phi = (np.exp(1j * np.multiply.outer(t_grid, lam)) * amp) @ vecs.T
    # the initial condition holds exactly, not just to eigensolver rounding
    phi[t_grid == 0] = np.eye(1, a.size)[0]
    return phi


def evolve(data: LanczosData, t_max: float, dt: float, method: str = "eig",
           truncate: int | None = None) -> KrylovEvolution:
    """Evolve ``phi_n(t)`` on the uniform grid ``0..t_max`` with spacing ``dt``.

    ``method="eig"`` diagonalizes the tridiagonal matrix and is exact up to the
    eigensolver; ``method="rk4"`` integrates the real first-order system with
    classical fourth-order Runge-Kutta and requires
    ``dt <= 0.1 / max(max|a_n|, max b_n, 1)``.
    """
    a, b = _chain(data, truncate)
    t = time_grid(t_max, dt)
    if method == "rk4":
        limit = max_stable_dt(LanczosData(tuple(a), tuple(b), True, a.size))
        if dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={dt:g} too large for RK4 on this chain; use dt <= {limit:.6g}")
        phi = _rk4(a, b, t)
    elif method == "eig":
        phi = _eig(a, b, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    probs = np.abs(phi) ** 2
    drift = float(np.max(np.abs(probs.sum(axis=1) - 1.0)))
    c_k = probs @ np.arange(a.size)
    return KrylovEvolution(t, phi, c_k, drift, method)


def complexity(evo: KrylovEvolution) -> np.ndarray:
    """``C_K(t_k) = sum_n n |phi_n(t_k)|^2``."""
    return evo.probabilities @ np.arange(evo.K)


def check_norm(evo: KrylovEvolution) -> float:
    return float(np.max(np.abs(evo.probabilities.sum(axis=1) - 1.0)))


def write_complexity_csv(evo: KrylovEvolution, path: str | Path) -> None:
    rows = ["# krylov-mqm complexity csv v1", "t,C_K"]
    rows += [f"{t:.17g},{c:.17g}" for t, c in zip(evo.t_grid, evo.c_k)]
    Path(path).write_text("\n".join(rows) + "\n")


def write_phi_csv(evo: KrylovEvolution, path: str | Path) -> None:
    probs = evo.probabilities
    head = ",".join(["t"] + [f"phi{n}_sq" for n in range(evo.K)])
    rows = ["# krylov-mqm phi csv v1", head]
    for t, p in zip(evo.t_grid, probs):
        rows.append(",".join([f"{t:.17g}"] + [f"{x:.17g}" for x in p]))
    Path(path).write_text("\n".join(rows) + "\n")
