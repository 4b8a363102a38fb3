"""Radius of convergence of the correlator and the first Krylov-complexity peak.

For a line spectrum ``omega_j = j pi / 2L`` with amplitudes ``c_j`` the ratio
test gives finite-n estimates

    t*_n = (2L / pi) ln[ (n / (n+1)) (c_n / c_{n+1})^2 ],

whose limit is ``t*``.  The limit is extrapolated with a least-squares
polynomial in ``1/n`` on the last third of the estimates.  When the amplitudes
decay like ``q^n`` the limit is ``(2L/pi) (-2 ln|q|)``; that value is kept as an
independent cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .evolution import DEFAULT_POINTS, evolve
from .lanczos import lanczos_coefficients
from .models import MQMQuarticSpec, mqm_quartic_spectrum, quartic_mode_amplitudes
from .special import quartic_params

__all__ = [
    "ConvergenceReport",
    "NoPeakError",
    "convergence_report",
    "first_peak",
    "ratio_radius",
]

MIN_COEFFICIENTS = 8
ASYMPTOTE_RTOL = 0.05
PEAK_RTOL = 0.10


class NoPeakError(ValueError):
    pass


@dataclass
class ConvergenceReport:
    tstar_estimates: list[float]
    tstar: float
    t_half: float
    tstar_asymptotic: float | None = None
    t_first_peak: float | None = None
    ratio_peak: float | None = None
    converged: bool = True
    flags: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def with_peak(self, t_peak: float) -> "ConvergenceReport":
        d = self.to_dict()
        d["t_first_peak"] = t_peak
        d["ratio_peak"] = t_peak / self.t_half if self.t_half > 0 else math.nan
        d["flags"] = list(self.flags)
        if not abs(d["ratio_peak"] - 1) <= PEAK_RTOL:
            d["flags"].append(f"first peak at {d['ratio_peak']:.4f} t*/2, outside the {PEAK_RTOL:.0%} window")
        return ConvergenceReport.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        return cls(**d)

    def to_text(self) -> str:
        """``key: value`` lines; values are JSON so the text parses back exactly."""
        return "".join(f"{k}: {json.dumps(v)}\n" for k, v in self.to_dict().items())

    @classmethod
    def from_text(cls, text: str) -> "ConvergenceReport":
        d = {}
        for line in text.splitlines():
            if line.strip():
                k, _, v = line.partition(":")
                d[k.strip()] = json.loads(v)
        return cls.from_dict(d)

    def row(self) -> dict:
        """Flat scalar summary for sweep tables."""
        return {"tstar": self.tstar, "tstar_asymptotic": self.tstar_asymptotic,
                "t_half": self.t_half, "t_first_peak": self.t_first_peak,
                "ratio_peak": self.ratio_peak, "converged": self.converged}


def _extrapolate(n: np.ndarray, est: np.ndarray) -> float:
    k = max(len(est) // 3, 4)
    x = 1.0 / n[-k:]
    y = est[-k:]
    deg = min(4, k - 2)
    return float(np.polyfit(x, y, deg)[-1])


def ratio_radius(coefficients: Sequence[float], box_L: float,
                 nome: float | None = None) -> ConvergenceReport:
    """Ratio-test estimate of ``t*`` from mode amplitudes ``c_1, c_2, ...``.

    Leading zeros are not allowed; the sequence is cut at the first amplitude
    that underflows to zero.  Fewer than eight usable terms is an error.
    """
    c = np.asarray(coefficients, dtype=float)
    if not box_L > 0:
        raise ValueError("box_L must be positive")
    zero = np.flatnonzero(c == 0)
    if zero.size:
        c = c[:zero[0]]
    if c.size < MIN_COEFFICIENTS:
        raise ArithmeticError(f"only {c.size} nonzero coefficients (need {MIN_COEFFICIENTS}); "
                              "raise the working precision or lower j_max")
    scale = 2 * box_L / math.pi
    n = np.arange(1, c.size, dtype=float)
    est = scale * np.log((n / (n + 1)) * (c[:-1] / c[1:]) ** 2)
    tstar = _extrapolate(n, est)
    flags: list[str] = []
    diffs = np.abs(np.diff(est[-max(len(est) // 3, 4):]))
    converged = True
    if not tstar > 0:
        converged = False
        flags.append("ratio test gives no positive radius")
    if diffs.size > 1 and not diffs[-1] <= diffs[0]:
        converged = False
        flags.append("finite-n estimates are not settling")
    asym = None
    if nome is not None and nome != 0:
        asym = scale * (-2 * math.log(abs(nome)))
        if converged and abs(tstar - asym) > ASYMPTOTE_RTOL * asym:
            flags.append(f"extrapolated t*={tstar:.6g} differs from -2 ln|q| value {asym:.6g} by > 5%")
    return ConvergenceReport(tstar_estimates=[float(v) for v in est], tstar=tstar, t_half=tstar / 2,
                             tstar_asymptotic=asym, converged=converged, flags=flags,
                             params={"box_L": box_L, "nome": nome, "n_coefficients": int(c.size)})


def first_peak(t: Sequence[float], c_k: Sequence[float], floor: float | None = None) -> float:
    """Time of the first strict local maximum, refined by a parabola through three points.

    Maxima standing less than ``floor`` (default ``1e-12 max(1, max|C_K|)``) above the preceding
    minimum are ignored, which keeps rounding noise from registering as a peak.
    """
    t = np.asarray(t, dtype=float)
    c = np.asarray(c_k, dtype=float)
    if t.shape != c.shape or t.size < 3:
        raise ValueError("need matching t and C_K arrays with at least three points")
    if floor is None:
        floor = 1e-12 * max(1.0, float(np.max(np.abs(c))))
    low = c[0]
    for i in range(1, c.size - 1):
        low = min(low, c[i])
        if c[i] > c[i - 1] and c[i] > c[i + 1] and c[i] - low > floor:
            denom = c[i - 1] - 2 * c[i] + c[i + 1]
            shift = 0.5 * (c[i - 1] - c[i + 1]) / denom
            return float(t[i] + max(-1.0, min(1.0, shift)) * (t[i + 1] - t[i]))
    raise NoPeakError("no peak in range")


def convergence_report(spec: MQMQuarticSpec, n_points: int = DEFAULT_POINTS,
                       t_max: float | None = None) -> ConvergenceReport:
    """Ratio test on the nome-series amplitudes joined with the first C_K peak.

    C_K is evolved from the ground-state spectrum over one period ``4L``
    unless ``t_max`` says otherwise.
    """
    p = quartic_params(spec.g)
    amps = quartic_mode_amplitudes(spec.g, spec.j_max, spec.series_tol)
    report = ratio_radius(amps, p.L, p.q)
    data = lanczos_coefficients(mqm_quartic_spectrum(spec))
    period = 4 * p.L
    t_max = period if t_max is None else t_max
    evo = evolve(data, t_max, period / n_points)
    report = report.with_peak(first_peak(evo.t_grid, evo.c_k))
    report.params.update({"g": spec.g, "j_max": spec.j_max, "L": p.L, "K": data.K,
                          "norm_drift": evo.norm_drift})
    return report
