"""Finite spectral measures and the correlators and moments derived from them.

A correlator is represented by its spectral decomposition

    C(t) = sum_j rho_j exp(-i omega_j t),

with real frequencies ``omega_j`` and non-negative weights ``rho_j``.  The
frequency moments use the matching sign convention

    M_n = sum_j rho_j (-omega_j)**n,

so that ``M_n = i**(-n) d^n C/dt^n`` at ``t = 0``.  With this convention the
diagonal Lanczos coefficient ``a_0 = M_1`` is non-positive for measures that
only carry positive frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import mpmath
import numpy as np

__all__ = [
    "GROUND",
    "InnerProduct",
    "MomentSequence",
    "PrecisionError",
    "SpectralLine",
    "SpectralMeasure",
    "correlator",
    "kms",
    "make_context",
    "moments",
    "normalize",
    "read_table",
    "required_precision",
    "thermalize",
    "write_table",
]

NORMALIZATION_TOL = 1e-12
# Relative tolerance under which two frequencies are treated as the same line.
MERGE_RTOL = 1e-13


class PrecisionError(ValueError):
    """Raised when the requested arbitrary precision is too small for the job."""

    def __init__(self, message: str, required_bits: int):
        super().__init__(message)
        self.required_bits = required_bits


@dataclass(frozen=True)
class InnerProduct:
    """Inner-product tag: ``"ground"`` or ``"kms"`` at inverse temperature ``beta``."""

    kind: str = "ground"
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in ("ground", "kms"):
            raise ValueError(f"unknown inner product {self.kind!r}")
        if self.kind == "kms":
            if self.beta is None or not self.beta > 0:
                raise ValueError("KMS inner product needs beta > 0")
        elif self.beta is not None:
            raise ValueError("ground-state inner product takes no beta")

    @property
    def is_kms(self) -> bool:
        return self.kind == "kms"

    def __str__(self) -> str:
        return "ground" if self.kind == "ground" else f"kms(beta={self.beta!r})"


GROUND = InnerProduct()


def kms(beta: float) -> InnerProduct:
    return InnerProduct("kms", float(beta))


@dataclass(frozen=True)
class SpectralLine:
    frequency: float
    weight: float

    def __post_init__(self):
        if not math.isfinite(self.frequency):
            raise ValueError(f"non-finite frequency {self.frequency!r}")
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise ValueError(f"weight must be finite and >= 0, got {self.weight!r}")


@dataclass(frozen=True)
class SpectralMeasure:
    """Immutable finite spectral measure.

    Build instances with :meth:`from_pairs`, which sorts the lines and merges
    duplicate frequencies.  ``metadata`` carries builder diagnostics (captured
    weight fraction, warnings, model parameters) and takes no part in equality.
    """

    lines: tuple[SpectralLine, ...]
    inner_product: InnerProduct = GROUND
    normalized: bool = False
    metadata: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        freqs = [ln.frequency for ln in self.lines]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("lines must have strictly increasing frequencies")
        if self.normalized:
            total = math.fsum(ln.weight for ln in self.lines)
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"measure flagged normalized but weights sum to {total!r}")
        if self.inner_product.is_kms and not _is_symmetric(self.lines):
            raise ValueError("KMS measure must be symmetric under omega -> -omega")

    @classmethod
    def from_pairs(
        cls,
        frequencies: Iterable[float],
        weights: Iterable[float],
        inner_product: InnerProduct = GROUND,
        normalized: bool = False,
        metadata: Mapping[str, object] | None = None,
    ) -> "SpectralMeasure":
        pairs = sorted(zip((float(f) for f in frequencies), (float(w) for w in weights)))
        merged: list[list[float]] = []
        for f, w in pairs:
            if merged and math.isclose(f, merged[-1][0], rel_tol=MERGE_RTOL, abs_tol=1e-300):
                merged[-1][1] += w
            else:
                merged.append([f, w])
        lines = tuple(SpectralLine(f, w) for f, w in merged)
        return cls(lines, inner_product, normalized, dict(metadata or {}))

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([ln.frequency for ln in self.lines])

    @property
    def weights(self) -> np.ndarray:
        return np.array([ln.weight for ln in self.lines])

    @property
    def total_weight(self) -> float:
        return math.fsum(ln.weight for ln in self.lines)

    def __len__(self) -> int:
        return len(self.lines)

    def support_size(self) -> int:
        """Number of distinct frequencies carrying nonzero weight."""
        return sum(1 for ln in self.lines if ln.weight > 0)

    def with_metadata(self, **extra) -> "SpectralMeasure":
        return SpectralMeasure(self.lines, self.inner_product, self.normalized,
                               {**self.metadata, **extra})


def _is_symmetric(lines: Sequence[SpectralLine]) -> bool:
    n = len(lines)
    for k in range(n):
        lo, hi = lines[k], lines[n - 1 - k]
        if not math.isclose(lo.frequency, -hi.frequency, rel_tol=1e-12, abs_tol=1e-300):
            return False
        if not math.isclose(lo.weight, hi.weight, rel_tol=1e-12, abs_tol=0.0):
            return False
    return True


@dataclass(frozen=True)
class MomentSequence:
    """Moments ``M_0..M_nmax`` held as mpmath numbers at ``precision_bits``."""

    values: tuple
    precision_bits: int

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self) -> int:
        return len(self.values)

    def odd_vanish(self) -> bool:
        return all(v == 0 for v in self.values[1::2])

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])


def make_context(precision_bits: int) -> mpmath.ctx_mp.MPContext:
    """Fresh mpmath context, so precision never leaks between callers."""
    ctx = mpmath.MPContext()
    ctx.prec = int(precision_bits)
    return ctx


def normalize(measure: SpectralMeasure) -> SpectralMeasure:
    """Rescale weights to sum to one so that ``C(0) = 1``."""
    total = measure.total_weight
    if not total > 0:
        raise ValueError("degenerate measure: weights sum to zero")
    lines = tuple(SpectralLine(ln.frequency, ln.weight / total) for ln in measure.lines)
    # Division can leave the sum off by a few ulp; absorb that into the largest line.
    resid = 1.0 - math.fsum(ln.weight for ln in lines)
    if resid:
        k = max(range(len(lines)), key=lambda i: lines[i].weight)
        lines = lines[:k] + (SpectralLine(lines[k].frequency, lines[k].weight + resid),) + lines[k + 1:]
    return SpectralMeasure(lines, measure.inner_product, True,
                           {**measure.metadata, "normalization": total})


def correlator(measure: SpectralMeasure, t):
    """Evaluate ``C(t) = sum_j rho_j exp(-i omega_j t)`` for scalar or array ``t``."""
    if not measure.normalized:
        raise ValueError("correlator requires a normalized measure")
    t_arr = np.asarray(t, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(t_arr, measure.frequencies))
    out = phases @ measure.weights
    return complex(out) if t_arr.ndim == 0 else out


def required_precision(measure: SpectralMeasure, n_max: int) -> int:
    """Minimum bits for moments up to ``n_max``.

    ``max(256, ceil(n_max * log2(max|omega| * n_max)) + 64)``; the p/2p rerun
    in :func:`krylov_mqm.lanczos.lanczos_coefficients` is the real safeguard.
    """
    wmax = max((abs(ln.frequency) for ln in measure.lines), default=0.0)
    scale = wmax * n_max
    if n_max <= 0 or scale <= 1:
        return 256
    return max(256, math.ceil(n_max * math.log2(scale)) + 64)


def moments(measure: SpectralMeasure, n_max: int, precision_bits: int) -> MomentSequence:
    """Exact power-sum moments ``M_n = sum rho (-omega)**n`` for ``n <= n_max``.

    Weights and frequencies are taken as the exact binary values of the stored
    floats.  ``M_0`` is exactly one: the weights are renormalized in the working
    precision.  For KMS measures the odd moments are set to exact zeros and the
    even ones summed over the positive half of the spectrum.
    """
    if not measure.normalized:
        raise ValueError("moments require a normalized measure")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    need = required_precision(measure, n_max)
    if precision_bits < need:
        raise PrecisionError(
            f"{precision_bits} bits is too little for moments up to n={n_max}; "
            f"need at least {need}", need)
    ctx = make_context(precision_bits)
    if measure.inner_product.is_kms:
        half = [ln for ln in measure.lines if ln.frequency > 0]
        zero = [ln for ln in measure.lines if ln.frequency == 0]
        ws = [2 * ctx.mpf(ln.weight) for ln in half]
        xs = [ctx.mpf(ln.frequency) for ln in half]
        w0 = ctx.fsum(ctx.mpf(ln.weight) for ln in zero)
        total = ctx.fsum(ws) + w0
        vals = [ctx.one]
        powers = [ctx.one] * len(xs)
        for n in range(1, n_max + 1):
            powers = [p * x for p, x in zip(powers, xs)]
            if n % 2:
                vals.append(ctx.zero)
            else:
                vals.append(ctx.fsum(w * p for w, p in zip(ws, powers)) / total)
        return MomentSequence(tuple(vals), int(precision_bits))
    ws = [ctx.mpf(ln.weight) for ln in measure.lines]
    xs = [-ctx.mpf(ln.frequency) for ln in measure.lines]
    total = ctx.fsum(ws)
    vals = [ctx.one]
    powers = [ctx.one] * len(xs)
    for _ in range(n_max):
        powers = [p * x for p, x in zip(powers, xs)]
        vals.append(ctx.fsum(w * p for w, p in zip(ws, powers)) / total)
    return MomentSequence(tuple(vals), int(precision_bits))


def thermalize(measure_gs: SpectralMeasure, beta: float) -> SpectralMeasure:
    """KMS (thermofield-double) measure at inverse temperature ``beta``.

    Each ground-state line ``(omega, rho)`` becomes the pair
    ``(+-omega, rho / (2 sinh(beta omega / 2)))``, the result of shifting
    ``t -> t - i beta/2`` in the thermal two-point function.
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    if any(ln.frequency <= 0 for ln in measure_gs.lines):
        raise ValueError("thermalize needs a one-sided measure with strictly positive frequencies")
    freqs, weights = [], []
    dropped = 0
    for ln in measure_gs.lines:
        x = beta * ln.frequency / 2
        # 1/(2 sinh x) written to stay finite for large x.
        factor = math.exp(-x) / (-math.expm1(-2 * x))
        w = ln.weight * factor
        if w == 0.0 and ln.weight > 0:
            dropped += 1
            continue
        freqs += [-ln.frequency, ln.frequency]
        weights += [w, w]
    meta = {k: v for k, v in measure_gs.metadata.items() if k != "normalization"}
    meta["beta"] = float(beta)
    if dropped:
        meta.setdefault("warnings", [])
        meta["warnings"] = list(meta["warnings"]) + [
            f"{dropped} line(s) underflowed to zero thermal weight and were dropped"]
    unnorm = SpectralMeasure.from_pairs(freqs, weights, kms(beta), metadata=meta)
    return normalize(unnorm)


# -- plain-text table -------------------------------------------------------

def write_table(measure: SpectralMeasure, path: str | Path) -> None:
    """Write ``frequency weight`` rows with ``#`` header lines for the tag and beta."""
    path = Path(path)
    head = ["# krylov-mqm spectral table v1",
            f"# inner_product: {measure.inner_product.kind}"]
    if measure.inner_product.is_kms:
        head.append(f"# beta: {measure.inner_product.beta!r}")
    head.append(f"# normalized: {str(measure.normalized).lower()}")
    for key in ("model", "g", "L", "nome", "captured_weight", "normalization"):
        if key in measure.metadata:
            head.append(f"# {key}: {measure.metadata[key]!r}")
    for w in measure.metadata.get("warnings", []):
        head.append(f"# warning: {w}")
    head.append("# frequency weight")
    rows = [f"{ln.frequency:.17g} {ln.weight:.17g}" for ln in measure.lines]
    path.write_text("\n".join(head + rows) + "\n")


def read_table(path: str | Path) -> SpectralMeasure:
    kind, beta, normalized = "ground", None, False
    freqs, weights = [], []
    meta: dict[str, object] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            key, value = key.strip(), value.strip()
            if not sep:
                continue
            if key == "inner_product":
                kind = value
            elif key == "beta":
                beta = float(value)
            elif key == "normalized":
                normalized = value == "true"
            elif key == "warning":
                meta.setdefault("warnings", []).append(value)
            else:
                meta[key] = value
            continue
        f, w = line.split()
        freqs.append(float(f))
        weights.append(float(w))
    ip = InnerProduct(kind, beta)
    measure = SpectralMeasure.from_pairs(freqs, weights, ip, metadata=meta)
    if normalized:
        measure = SpectralMeasure(measure.lines, ip, True, measure.metadata)
    return measure
