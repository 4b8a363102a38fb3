"""Spectral measures of decoupled oscillators and of planar one-matrix QM.

The matrix-model correlators come from the collective-field description: the
fluctuation field lives on ``q in (-L, L)`` with modes ``omega_j = j pi / 2L``,
and the connected ``<Tr M^n(t) Tr M^n(0)>`` correlator has one line per mode
with weight ``2 pi j / L^2 * c_j^2``, where ``c_j`` is the projection of
``x^n[q]`` onto ``cos(j pi q / L)``.

Two independent routes give the quartic-well projections:

* :func:`mqm_quartic_spectrum` sums nome series for the Fourier coefficients
  of ``sn^2``;
* :func:`mqm_quartic_spectrum_numeric` inverts the classical travel-time
  integral and projects numerically in high precision.

The numeric route is the reference the analytic one is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

from .spectral import GROUND, SpectralMeasure, normalize, thermalize
from .special import quartic_params

__all__ = [
    "CoefficientPair",
    "MQMQuarticSpec",
    "OscillatorChainSpec",
    "mqm_free_spectrum",
    "mqm_quartic_spectrum",
    "mqm_quartic_spectrum_numeric",
    "mqm_quartic_thermal",
    "oscillator_ground",
    "oscillator_thermal",
    "quartic_coefficients",
    "quartic_mode_amplitudes",
]

# Lines whose projection falls below this are dropped: their squared weight
# would leave the normal double range.
_MIN_AMPLITUDE = 1e-150


@dataclass(frozen=True)
class OscillatorChainSpec:
    """``J`` modes of a free field on a circle, ``omega_j = j pi / (2 box_L)``."""

    J: int
    box_L: float = math.pi / 2

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        if not self.box_L > 0:
            raise ValueError(f"box_L must be > 0, got {self.box_L!r}")

    @property
    def frequencies(self) -> list[float]:
        return [j * math.pi / (2 * self.box_L) for j in range(1, self.J + 1)]


@dataclass(frozen=True)
class MQMQuarticSpec:
    """Quartic well ``v = x^2 + g x^4`` at ``2 mu_F = 1``, truncated to ``j_max`` modes."""

    g: float
    j_max: int = 64
    series_tol: float = 1e-17

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be > 0, got {self.g!r}")
        if int(self.j_max) != self.j_max or self.j_max < 1:
            raise ValueError(f"j_max must be a positive integer, got {self.j_max!r}")
        if not self.series_tol > 0:
            raise ValueError("series_tol must be > 0")


@dataclass(frozen=True)
class CoefficientPair:
    """Nome-series sums for mode ``j``.

    ``A_j = sum_l q^(2l+1+j) / ((1 - q^(2l+2j+1)) (1 - q^(2l+1)))`` and
    ``B_j = sum_{l<j} q^j / ((1 - q^(2l+1)) (1 - q^(2j-2l-1)))``.  The
    ``cos(j pi q/L)`` Fourier coefficient of ``sn^2`` is proportional to
    ``2 A_j - B_j``, which :attr:`amplitude` returns.
    """

    j: int
    A: float
    B: float

    @property
    def amplitude(self) -> float:
        return 2.0 * self.A - self.B


# -- oscillators ------------------------------------------------------------

def oscillator_ground(spec: OscillatorChainSpec) -> SpectralMeasure:
    """Ground-state ``<X(t) X(0)>`` of ``J`` modes: lines ``(omega_j, 1/(2 omega_j))``."""
    freqs = spec.frequencies
    m = SpectralMeasure.from_pairs(freqs, [1.0 / (2.0 * w) for w in freqs], GROUND,
                                   metadata={"model": "oscillators", "J": spec.J,
                                             "box_L": spec.box_L})
    return normalize(m)


def oscillator_thermal(spec: OscillatorChainSpec, beta: float) -> SpectralMeasure:
    return thermalize(oscillator_ground(spec), beta)


# -- quadratic well ----------------------------------------------------------

_FREE_TABLE = {
    2: ((1, 0.5),),
    4: ((1, 0.5), (2, 1.0 / 16)),
    6: ((1, 225.0 / 512), (2, 9.0 / 64), (3, 3.0 / 512)),
}


def mqm_free_spectrum(n: int, mu_F: float = 0.5) -> SpectralMeasure:
    """Connected ``<Tr M^n(t) Tr M^n(0)>`` of the quadratic well, ``n in {2, 4, 6}``.

    Lines sit at ``j sqrt(2)`` with weights ``c mu_F^n pi``; other even powers
    are available numerically through ``mqm_quartic_spectrum_numeric(power=n)``
    at small ``g``.
    """
    if n not in _FREE_TABLE:
        raise ValueError(f"Tr M^{n} is not tabulated (n in 2, 4, 6); "
                         "use mqm_quartic_spectrum_numeric with power=n instead")
    if not mu_F > 0:
        raise ValueError("mu_F must be > 0")
    rows = _FREE_TABLE[n]
    m = SpectralMeasure.from_pairs([j * math.sqrt(2.0) for j, _ in rows],
                                   [c * mu_F ** n * math.pi for _, c in rows], GROUND,
                                   metadata={"model": "mqm-free", "n": n, "mu_F": mu_F,
                                             "L": math.pi / (2 * math.sqrt(2.0))})
    return normalize(m)


# -- quartic well: nome series --------------------------------------------------

def _coefficients_at(q: float, j: int, tol: float) -> CoefficientPair:
    if not abs(q) < 1:
        raise ArithmeticError(f"nome series diverges for |q| = {abs(q)!r} >= 1")
    A = 0.0
    for l in range(100_000):
        term = q ** (2 * l + 1 + j) / ((1 - q ** (2 * l + 2 * j + 1)) * (1 - q ** (2 * l + 1)))
        A += term
        if abs(term) <= tol * abs(A) or term == 0.0:
            break
    else:  # pragma: no cover - |q| < 1 always terminates
        raise ArithmeticError("A_j series failed to converge")
    B = math.fsum(q ** j / ((1 - q ** (2 * l + 1)) * (1 - q ** (2 * j - 2 * l - 1)))
                  for l in range(j))
    return CoefficientPair(j, A, B)


def quartic_coefficients(g: float, j: int, tol: float = 1e-17) -> CoefficientPair:
    """``A_j``, ``B_j`` at the (negative) nome of the quartic-well parameter."""
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if int(j) != j or j < 1:
        raise ValueError(f"mode index must be a positive integer, got {j!r}")
    return _coefficients_at(quartic_params(g).q, int(j), tol)


def quartic_mode_amplitudes(g: float, j_max: int, tol: float = 1e-17) -> list[float]:
    """``2 A_j - B_j`` for ``j = 1..j_max``; the input of the ratio test."""
    q = quartic_params(g).q
    return [_coefficients_at(q, j, tol).amplitude for j in range(1, j_max + 1)]


def mqm_quartic_spectrum(spec: MQMQuarticSpec) -> SpectralMeasure:
    """Ground-state ``<Tr M^2(t) Tr M^2(0)>`` of the quartic well from the nome series.

    ``x^2[q] = Lambda^2 sn^2(K q / L | m)`` has
    ``cos(j pi q / L)`` coefficients ``Lambda^2 2 pi^2 / (m K^2) (2 A_j - B_j)``.
    Weights are ``2 pi j / L^2`` times the squared projections, then normalized.
    """
    p = quartic_params(spec.g)
    pref = p.L * p.Lambda ** 2 * 2 * math.pi ** 2 / (p.m * p.K ** 2)
    pairs = [_coefficients_at(p.q, j, spec.series_tol) for j in range(1, spec.j_max + 2)]
    proj = [pref * c.amplitude for c in pairs]
    raw = [2 * math.pi * j / p.L ** 2 * c ** 2 for j, c in enumerate(proj, start=1)]
    warnings: list[str] = []
    keep = [j for j in range(1, spec.j_max + 1) if abs(proj[j - 1]) > _MIN_AMPLITUDE]
    if len(keep) < spec.j_max:
        warnings.append(f"modes j > {len(keep)} underflow double precision and were dropped")
    body = math.fsum(raw[j - 1] for j in keep)
    # Geometric tail beyond the last kept mode, from the ratio of its successor.
    last = keep[-1]
    r = raw[last] / raw[last - 1] if raw[last - 1] > 0 else 0.0
    tail = raw[last] / (1 - r) if r < 1 else math.inf
    captured = body / (body + tail)
    if 1 - captured > spec.series_tol and len(keep) == spec.j_max:
        warnings.append(f"j_max={spec.j_max} leaves an estimated weight fraction "
                        f"{1 - captured:.3g} outside the truncation")
    meta = {"model": "mqm-quartic", "g": spec.g, "L": p.L, "Lambda": p.Lambda, "m": p.m,
            "nome": p.q, "captured_weight": captured, "normalization_abs": body,
            "projections": [proj[j - 1] for j in keep], "warnings": warnings}
    m = SpectralMeasure.from_pairs([j * p.omega_c for j in keep], [raw[j - 1] for j in keep],
                                   GROUND, metadata=meta)
    return normalize(m)


def mqm_quartic_thermal(spec: MQMQuarticSpec, beta: float) -> SpectralMeasure:
    """KMS counterpart of :func:`mqm_quartic_spectrum` at inverse temperature ``beta``."""
    return thermalize(mqm_quartic_spectrum(spec), beta)


# -- quartic well: numeric projection ------------------------------------------

def mqm_quartic_spectrum_numeric(spec: MQMQuarticSpec, power: int = 2, n_nodes: int | None = None,
                                 dps: int | None = None) -> SpectralMeasure:
    """Numeric-projection route to the ``<Tr M^power Tr M^power>`` spectrum.

    Inverts ``q(x) = int_0^x dx' / sqrt(1 - 2x'^2 - 2g x'^4)`` on a uniform
    ``q`` grid over the quarter period and projects ``x^power[q]`` onto
    ``cos(j pi q / L)`` with the trapezoid rule, which converges
    geometrically for this smooth periodic integrand.  The turning-point
    singularity is removed by ``x = Lambda sin(theta)``.  Everything runs in
    ``dps`` decimal digits; modes below the resulting noise floor are
    dropped.  ``power`` other than 2 is experimental.
    """
    if power < 2 or power % 2:
        raise ValueError("power must be an even integer >= 2")
    j_max = spec.j_max
    n_nodes = n_nodes or max(32, 2 * j_max + 16)
    if n_nodes % 2:
        raise ValueError("n_nodes must be even")
    dps = dps or max(30, 20 + 2 * j_max)
    ctx = mpmath.MPContext()
    ctx.dps = dps
    g = ctx.mpf(spec.g)
    poly = lambda x: 1 - 2 * x ** 2 - 2 * g * x ** 4  # noqa: E731

    # Turning point: positive root of poly, bracketed in (0, 1/sqrt(2)].
    lam = ctx.findroot(poly, (ctx.mpf(0), 1 / ctx.sqrt(2)), solver="anderson")
    lam2 = lam ** 2
    # poly(x) = (Lambda^2 - x^2) * (2g x^2 + 2g Lambda^2 + 2) by synthetic division.
    def dq_dtheta(th):
        x2 = lam2 * ctx.sin(th) ** 2
        return 1 / ctx.sqrt(2 * g * x2 + 2 * g * lam2 + 2)

    def integrate(a, b):
        return ctx.quad(dq_dtheta, [a, b])

    half_pi = ctx.pi / 2
    L = integrate(0, half_pi)
    if not L > 0:
        raise ArithmeticError("travel-time quadrature failed near the turning point; "
                              "refine the theta substitution")

    thetas = [ctx.zero]
    q_prev, th_prev = ctx.zero, ctx.zero
    for k in range(1, n_nodes):
        target = L * k / n_nodes
        lo, hi = th_prev, half_pi
        th = th_prev + (target - q_prev) / dq_dtheta(th_prev)
        for _ in range(100):
            if not lo < th < hi:
                th = (lo + hi) / 2
            val = q_prev + integrate(th_prev, th) - target
            if val > 0:
                hi = th
            else:
                lo = th
            step = val / dq_dtheta(th)
            th -= step
            if abs(step) < ctx.eps * 16:
                break
        else:  # pragma: no cover
            raise ArithmeticError(f"inversion of q(x) failed at node {k}")
        q_prev = q_prev + integrate(th_prev, th)
        th_prev = th
        thetas.append(th)
    thetas.append(half_pi)
    f = [(lam * ctx.sin(th)) ** power for th in thetas]

    def project(j, stride=1):
        idx = range(0, n_nodes + 1, stride)
        n = n_nodes // stride
        s = ctx.fsum((f[k] / 2 if k in (0, n_nodes) else f[k]) * ctx.cos(j * ctx.pi * k / n_nodes)
                     for k in idx)
        return 2 * (L / n) * s

    floor = ctx.mpf(10) ** (-(dps - 10)) * max(abs(v) for v in f)
    proj, coarse_err, keep = [], 0.0, []
    for j in range(1, j_max + 1):
        c = project(j)
        if abs(c) <= floor:
            continue
        keep.append(j)
        proj.append(c)
        if j <= n_nodes // 8:
            coarse_err = max(coarse_err, float(abs(project(j, 2) / c - 1)))
    if not keep:
        raise ArithmeticError("no mode rose above the numerical noise floor")
    weights = [2 * ctx.pi * j / L ** 2 * c ** 2 for j, c in zip(keep, proj)]
    Lf = float(L)
    meta = {"model": "mqm-quartic-numeric", "g": spec.g, "power": power, "L": Lf,
            "Lambda": float(lam), "n_nodes": n_nodes, "dps": dps,
            "projections": [float(c) for c in proj],
            "normalization_abs": float(ctx.fsum(weights)),
            "coarse_grid_change": coarse_err,
            "dropped_modes": [j for j in range(1, j_max + 1) if j not in keep]}
    total = ctx.fsum(weights)
    m = SpectralMeasure.from_pairs([j * math.pi / (2 * Lf) for j in keep],
                                   [float(w / total) for w in weights], GROUND, metadata=meta)
    return normalize(m)
