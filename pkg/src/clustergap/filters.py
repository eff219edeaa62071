"""Rational filters with simple poles.

A filter is the rational function

    r(z) = omega0 + sum_j w_j / (z_j - z)

stored in partial-fraction form.  Contour-quadrature (Butterworth) and
Cayley filters are provided as constructors, together with the algebra
needed to invert r and to test whether a filter separates an eigenvalue
cluster from the rest of a spectrum.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "PoleEvaluationError",
    "DegenerateFilterError",
    "RootFindingError",
    "RationalFilter",
    "ContourCircle",
    "InverseImage",
    "AssumptionReport",
    "evaluate",
    "butterworth",
    "cayley",
    "simple_pole_filter",
    "inverse_image",
    "check_assumption_r",
]

POLE_TOL = 1e-14
# numerically repeated roots closer than this (relative) are merged
ROOT_MERGE = 1e-6


class PoleEvaluationError(ValueError):
    """Raised when a filter is evaluated at one of its poles."""


class DegenerateFilterError(ValueError):
    """Raised when ``mu`` equals the constant term of the filter."""


class RootFindingError(RuntimeError):
    """Raised when computed inverse images fail the residual check."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class RationalFilter:
    """Partial-fraction rational function with simple poles.

    Parameters
    ----------
    omega0 : complex
        Constant term.
    poles : tuple of complex
        Pairwise distinct poles ``z_j``.
    weights : tuple of complex
        Residue-like weights ``w_j`` (one per pole).
    """

    omega0: complex
    poles: tuple
    weights: tuple

    def __post_init__(self):
        poles = tuple(complex(z) for z in self.poles)
        weights = tuple(complex(w) for w in self.weights)
        if not poles:
            raise ValueError("a rational filter needs at least one pole")
        if len(poles) != len(weights):
            raise ValueError("poles and weights must have equal length")
        zs = np.array(poles)
        if len(zs) > 1:
            d = np.abs(zs[:, None] - zs[None, :])
            d[np.diag_indices_from(d)] = np.inf
            if d.min() < POLE_TOL * (1 + np.abs(zs).max()):
                raise ValueError("filter poles must be pairwise distinct")
        object.__setattr__(self, "omega0", complex(self.omega0))
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "weights", weights)

    @property
    def npoles(self) -> int:
        return len(self.poles)

    def __call__(self, z):
        return evaluate(self, z)

    def to_text(self) -> str:
        lines = [f"omega0 {self.omega0.real:.17g} {self.omega0.imag:.17g}"]
        for z, w in zip(self.poles, self.weights):
            lines.append(
                f"pole {z.real:.17g} {z.imag:.17g} {w.real:.17g} {w.imag:.17g}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RationalFilter":
        omega0 = None
        poles, weights = [], []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "omega0" and len(tok) == 3:
                    omega0 = complex(float(tok[1]), float(tok[2]))
                elif tok[0] == "pole" and len(tok) == 5:
                    vals = [float(t) for t in tok[1:]]
                    poles.append(complex(vals[0], vals[1]))
                    weights.append(complex(vals[2], vals[3]))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"line {lineno}: malformed filter line {raw!r}") from None
        if omega0 is None:
            raise ValueError("filter text has no omega0 line")
        return cls(omega0, tuple(poles), tuple(weights))


def evaluate(filt: RationalFilter, z):
    """Evaluate ``filt`` at a scalar or array ``z``."""
    zz = np.asarray(z, dtype=complex)
    zs = np.asarray(filt.poles)
    ws = np.asarray(filt.weights)
    diff = zs - zz[..., None]
    if np.any(np.abs(diff).min(axis=-1) < POLE_TOL):
        raise PoleEvaluationError(f"evaluation at a pole of the filter (z={z})")
    val = filt.omega0 + (ws / diff).sum(axis=-1)
    if np.ndim(z) == 0:
        return complex(val)
    return val


@dataclass(frozen=True)
class ContourCircle:
    """Circle ``center + radius * phase * exp(i t)`` discretized with
    ``nquad`` trapezoid nodes.

    If ``phase`` is omitted it defaults to ``phase_sign * exp(i pi / nquad)``,
    which keeps the nodes off the real axis through the center.
    """

    center: complex
    radius: float
    nquad: int = 4
    phase: complex | None = None
    phase_sign: int = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("contour radius must be positive")
        if int(self.nquad) != self.nquad or self.nquad < 2:
            raise ValueError("nquad must be an integer >= 2")
        if self.phase_sign not in (1, -1):
            raise ValueError("phase_sign must be +1 or -1")
        phase = self.phase
        if phase is None:
            phase = self.phase_sign * cmath.exp(1j * math.pi / self.nquad)
        phase = complex(phase)
        if abs(abs(phase) - 1.0) > 1e-14:
            raise ValueError("contour phase must have unit modulus")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "nquad", int(self.nquad))
        object.__setattr__(self, "phase", phase)

    def nodes(self) -> np.ndarray:
        roots = np.exp(2j * np.pi * np.arange(self.nquad) / self.nquad)
        return self.center + self.radius * self.phase * roots

    def contains(self, z, margin: float = 0.0):
        return np.abs(np.asarray(z) - self.center) <= self.radius * (1.0 + margin)


def butterworth(contour: ContourCircle) -> RationalFilter:
    """Filter from the N-point trapezoid rule on a circular contour.

    Its closed form is ``1 / (1 - ((z - O) / (R phi))**N)``.
    """
    n = contour.nquad
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    rphi = contour.radius * contour.phase
    weights = roots * rphi / n
    poles = rphi * roots + contour.center
    return RationalFilter(0.0, tuple(poles), tuple(weights))


def cayley() -> RationalFilter:
    """The Cayley transform ``(z - i) / (z + i) = 1 - 2i / (z + i)``."""
    return RationalFilter(1.0, (-1j,), (2j,))


def simple_pole_filter(omega0, terms: Iterable[Sequence]) -> RationalFilter:
    """Build a filter from ``(pole, weight)`` or ``(pole, weight, order)`` terms.

    Only simple poles (order 1) are supported; anything else is rejected.
    """
    poles, weights = [], []
    for term in terms:
        if len(term) == 3 and int(term[2]) != 1:
            raise ValueError(
                f"pole {term[0]} has order {term[2]}; only simple poles are supported"
            )
        if len(term) not in (2, 3):
            raise ValueError(f"malformed filter term {term!r}")
        poles.append(term[0])
        weights.append(term[1])
    return RationalFilter(omega0, tuple(poles), tuple(weights))


@dataclass(frozen=True)
class InverseImage:
    """Points ``lam`` (off the poles) with ``r(lam) = mu``."""

    mu: complex
    roots: tuple
    multiplicities: tuple
    cancelled: int = 0
    residuals: tuple = field(default=(), repr=False)

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


def _numerator(filt: RationalFilter, mu: complex) -> np.ndarray:
    """Coefficients (ascending) of ``(omega0 - mu) q(z) + sum_j w_j prod_{k!=j}(z_k - z)``."""
    zs = filt.poles
    q = np.array([1.0 + 0j])
    for zk in zs:
        q = P.polymul(q, [zk, -1.0])
    num = (filt.omega0 - mu) * q
    for j, wj in enumerate(filt.weights):
        term = np.array([wj], dtype=complex)
        for k, zk in enumerate(zs):
            if k != j:
                term = P.polymul(term, [zk, -1.0])
        num = P.polyadd(num, term)
    return num


def _cluster_points(values: np.ndarray, radius: float):
    reps, counts = [], []
    for v in values:
        for i, r in enumerate(reps):
            if abs(v - r) <= radius * (1 + abs(r)):
                counts[i] += 1
                break
        else:
            reps.append(v)
            counts.append(1)
    # average each group for a better representative
    out = []
    for r in reps:
        grp = [v for v in values if abs(v - r) <= radius * (1 + abs(r))]
        out.append(complex(np.mean(grp)))
    return out, counts


def inverse_image(filt: RationalFilter, mu, tol_root: float = 1e-8) -> InverseImage:
    """Solve ``r(lam) = mu`` for ``lam`` outside the pole set.

    The numerator ``p - mu q`` of ``r - mu`` is formed from the partial
    fractions and its roots are the eigenvalues of the companion matrix.
    Roots that coincide with a pole are the factors cancelled against ``q``.

    Raises
    ------
    DegenerateFilterError
        If ``mu`` equals ``omega0`` (the numerator loses degree).
    RootFindingError
        If a returned root does not reproduce ``mu``.
    """
    mu = complex(mu)
    scale = abs(filt.omega0) + max(abs(w) for w in filt.weights) + abs(mu)
    if abs(mu - filt.omega0) <= 1e-14 * max(scale, 1.0):
        raise DegenerateFilterError("mu coincides with the constant term omega0")
    num = _numerator(filt, mu)
    # np.roots takes descending coefficients and uses the companion matrix
    raw = np.roots(num[::-1]) if len(num) > 1 else np.array([], dtype=complex)
    raw = np.array([_newton_polish(num, r) for r in raw], dtype=complex)

    poles = np.array(filt.poles)
    kept, cancelled = [], 0
    for r in raw:
        if np.min(np.abs(poles - r) / (1 + np.abs(poles))) <= 1e-8:
            cancelled += 1
        else:
            kept.append(r)
    roots, mults = _cluster_points(np.array(kept), ROOT_MERGE)

    residuals = tuple(abs(evaluate(filt, r) - mu) for r in roots)
    bad = [res for res in residuals if res > tol_root * max(1.0, abs(mu))]
    if bad:
        raise RootFindingError(
            f"inverse image residuals too large: max {max(bad):.3e}", residuals
        )
    return InverseImage(mu, tuple(roots), tuple(mults), cancelled, residuals)


def _newton_polish(coeffs: np.ndarray, x: complex, steps: int = 3) -> complex:
    dcoeffs = P.polyder(coeffs)
    for _ in range(steps):
        f = P.polyval(x, coeffs)
        df = P.polyval(x, dcoeffs)
        if df == 0:
            break
        step = f / df
        if not np.isfinite(step) or abs(step) > 1e-3 * (1 + abs(x)):
            break
        x = x - step
    return complex(x)


@dataclass
class AssumptionReport:
    """Outcome of :func:`check_assumption_r`; truthy when the filter is admissible."""

    holds: bool
    mapped: list
    violations: list

    def __bool__(self):
        return self.holds

    def __str__(self):
        if self.holds:
            return "filter separates the cluster: ok"
        return "filter does not separate the cluster: " + "; ".join(self.violations)


def check_assumption_r(filt, cluster, spectrum, tol: float = 1e-8) -> AssumptionReport:
    """Check that the filter keeps the cluster apart from the rest of ``spectrum``.

    Two conditions are tested: no mapped cluster value equals ``omega0``, and
    every preimage of a mapped value that is in ``spectrum`` is in ``cluster``.
    """
    cluster = np.asarray(list(cluster), dtype=complex)
    spectrum = np.asarray(list(spectrum), dtype=complex)
    for lam in cluster:
        if np.min(np.abs(spectrum - lam)) > tol * (1 + abs(lam)):
            raise ValueError(f"cluster point {lam} is not in the spectrum")
    mapped = [evaluate(filt, lam) for lam in cluster]
    violations = []
    for mu in mapped:
        if abs(mu - filt.omega0) <= tol * (1 + abs(mu)):
            violations.append(f"mapped value {mu:.6g} equals omega0")
            continue
        for root in inverse_image(filt, mu):
            near_spec = np.min(np.abs(spectrum - root)) <= tol * (1 + abs(root))
            near_cluster = np.min(np.abs(cluster - root)) <= tol * (1 + abs(root))
            if near_spec and not near_cluster:
                violations.append(
                    f"spectral point {root:.6g} outside the cluster maps to {mu:.6g}"
                )
    return AssumptionReport(not violations, mapped, violations)
