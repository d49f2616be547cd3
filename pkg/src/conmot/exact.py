"""Exact integer arithmetic for alternating bipartite play.

Alternating-play orbits grow exponentially and their conserved quadratic is a
difference of same-order terms, so any fixed-precision evaluation of it
eventually drowns in rounding error. This module keeps the whole orbit as
integer coordinate vectors over a shared integer scale: one step multiplies
the scale by a fixed integer g, every state is an exact rational, and
conservation of the quadratic becomes an integer identity that is checked
with equality, not with a tolerance.

With step sizes eta_i = p_i/q_i and an integer-scaled payoff matrix
At = D * A, one forward step maps (AX, AY, S) to

    B   = q1*D*AX + p1*(At @ AY)
    AX' = q2*D*B
    AY' = g*AY + p2*(At.T @ B)        with g = q1*q2*D^2, S' = g*S

and the backward step mirrors it. The conserved quadratic has integer
numerator  num = q1*p2*D*|AX|^2 - q2*p1*D*|AY|^2 + p1*p2*(AX.T At AY)  over
denominator  p1*p2*D*S^2,  so conservation is  num_t == num_0 * g^(2t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConmotError
from .objectives import PayoffData
from .rationals import as_fraction, ratio_to_float

try:  # gmpy2 keeps the big-integer work fast; plain int is a correct fallback
    from gmpy2 import mpz
except ImportError:  # pragma: no cover
    mpz = int

__all__ = [
    "ExactAltOrbit",
    "ConservationAudit",
    "conservation_audit",
    "verify_conservation_identity",
    "assemble_transition_matrix",
    "difference_log_stats",
]


def _payoff_integerized(payoff: PayoffData) -> tuple[list[list], int]:
    """Integer matrix At and positive integer D with A = At / D, exactly."""
    entries = [[as_fraction(v) for v in row] for row in payoff.exact]
    denom = 1
    for row in entries:
        for v in row:
            denom = denom * v.denominator // math.gcd(denom, v.denominator)
    scaled = [[mpz(v.numerator * (denom // v.denominator)) for v in row] for row in entries]
    return scaled, denom


def _matvec(rows: list[list], v: list) -> list:
    return [sum(r[j] * v[j] for j in range(len(v))) for r in rows]


class ExactAltOrbit:
    """One alternating-play orbit held in exact arithmetic.

    The public accessors return float64 snapshots (rounded from the exact
    rationals) or Fractions; internally nothing is ever rounded. ``advance``
    and ``retreat`` move the orbit position in either direction and are exact
    mutual inverses.
    """

    def __init__(self, payoff: PayoffData, eta1, eta2, xy0) -> None:
        eta1, eta2 = as_fraction(eta1), as_fraction(eta2)
        if eta1 <= 0 or eta2 <= 0:
            raise ConmotError("step sizes must be positive")
        self.payoff = payoff
        self.eta1, self.eta2 = eta1, eta2
        dx, dy = payoff.dimension_x, payoff.dimension_y
        xy = [as_fraction(v) for v in xy0]
        if len(xy) != dx + dy:
            raise ConmotError(
                f"initial state has length {len(xy)}, expected {dx + dy}"
            )

        at, d_a = _payoff_integerized(payoff)
        p1, q1 = mpz(eta1.numerator), mpz(eta1.denominator)
        p2, q2 = mpz(eta2.numerator), mpz(eta2.denominator)
        self._at = at
        self._att = [[at[i][j] for i in range(dx)] for j in range(dy)]
        self._p1a = [[p1 * v for v in row] for row in at]
        self._p2at = [[p2 * v for v in row] for row in self._att]
        self._c1 = q1 * mpz(d_a)
        self._c2 = q2 * mpz(d_a)
        self._g = q1 * q2 * mpz(d_a) ** 2
        self._g2 = self._g * self._g
        self._kx = q1 * p2 * mpz(d_a)
        self._ky = q2 * p1 * mpz(d_a)
        self._kxy = p1 * p2
        self._phi_den_unit = p1 * p2 * mpz(d_a)
        self._d_a = mpz(d_a)

        s0 = 1
        for v in xy:
            s0 = s0 * v.denominator // math.gcd(s0, v.denominator)
        self._s = mpz(s0)
        self._s0 = mpz(s0)
        coords = [mpz(v.numerator * (s0 // v.denominator)) for v in xy]
        self._ax = coords[:dx]
        self._ay = coords[dx:]
        self._pos = 0
        self._gpow = mpz(1)
        self._num0 = self._phi_numerator()

    @property
    def position(self) -> int:
        """Signed orbit index relative to the initial state."""
        return self._pos

    def advance(self, n: int = 1) -> None:
        for _ in range(n):
            ax, ay = self._ax, self._ay
            b = [self._c1 * ax[i] + s for i, s in enumerate(_matvec(self._p1a, ay))]
            self._ax = [self._c2 * v for v in b]
            self._ay = [self._g * ay[j] + s for j, s in enumerate(_matvec(self._p2at, b))]
            self._s *= self._g
            self._gpow *= self._g2
            self._pos += 1

    def retreat(self, n: int = 1) -> None:
        for _ in range(n):
            ax, ay = self._ax, self._ay
            by = [self._c2 * ay[j] - s for j, s in enumerate(_matvec(self._p2at, ax))]
            self._ax = [self._g * ax[i] - s for i, s in enumerate(_matvec(self._p1a, by))]
            self._ay = [self._c1 * v for v in by]
            self._s *= self._g
            self._gpow *= self._g2
            self._pos -= 1

    def xy_float(self) -> np.ndarray:
        s = self._s
        return np.array([ratio_to_float(v, s) for v in self._ax + self._ay])

    def xy_fractions(self) -> list[Fraction]:
        s = int(self._s)
        return [Fraction(int(v), s) for v in self._ax + self._ay]

    def _phi_numerator(self):
        ax, ay = self._ax, self._ay
        sx = sum(v * v for v in ax)
        sy = sum(v * v for v in ay)
        cross = sum(ax[i] * s for i, s in enumerate(_matvec(self._at, ay)))
        return self._kx * sx - self._ky * sy + self._kxy * cross

    def phi_fraction(self) -> Fraction:
        den = self._phi_den_unit * self._s * self._s
        return Fraction(int(self._phi_numerator()), int(den))

    def phi_float(self) -> float:
        den = self._phi_den_unit * self._s * self._s
        return ratio_to_float(self._phi_numerator(), den)

    def payoff_value_float(self) -> float:
        """Current bilinear value x.T A y as a float snapshot."""
        cross = sum(
            self._ax[i] * s for i, s in enumerate(_matvec(self._at, self._ay))
        )
        return ratio_to_float(cross, self._d_a * self._s * self._s)

    def phi_matches_start(self) -> bool:
        """Exact integer check that the quadratic still equals its t=0 value."""
        return self._phi_numerator() == self._num0 * self._gpow

    def phi_defect_float(self) -> float:
        """Relative drift |phi_t - phi_0| / (1 + |phi_0|); exactly 0 when conserved."""
        if self.phi_matches_start():
            return 0.0
        phi0 = Fraction(int(self._num0), int(self._phi_den_unit * self._s0 * self._s0))
        drift = abs(self.phi_fraction() - phi0)
        return float(drift / (1 + abs(phi0)))


def verify_conservation_identity(payoff: PayoffData, eta1, eta2) -> bool:
    """Exact certificate M.T H M == H for the one-step transition matrix.

    M is the linear alternating-play update and H the symmetric matrix of the
    conserved quadratic. Both are integerized (no division happens), so a True
    return proves the quadratic is constant along every orbit of this
    instance, at every step, with zero defect.
    """
    eta1, eta2 = as_fraction(eta1), as_fraction(eta2)
    at, d_a = _payoff_integerized(payoff)
    p1, q1 = eta1.numerator, eta1.denominator
    p2, q2 = eta2.numerator, eta2.denominator
    dx, dy = payoff.dimension_x, payoff.dimension_y
    n = dx + dy
    mu = q1 * q2 * d_a * d_a

    mint = [[0] * n for _ in range(n)]
    hint = [[0] * n for _ in range(n)]
    for i in range(dx):
        mint[i][i] = mu
        hint[i][i] = 2 * p2 * q1 * d_a
    for j in range(dy):
        hint[dx + j][dx + j] = -2 * p1 * q2 * d_a
    for i in range(dx):
        for j in range(dy):
            a_ij = int(at[i][j])
            mint[i][dx + j] = p1 * q2 * d_a * a_ij
            mint[dx + j][i] = p2 * q1 * d_a * a_ij
            hint[i][dx + j] = p1 * p2 * a_ij
            hint[dx + j][i] = p1 * p2 * a_ij
    for j in range(dy):
        for jj in range(dy):
            acc = sum(int(at[i][j]) * int(at[i][jj]) for i in range(dx))
            mint[dx + j][dx + jj] = p1 * p2 * acc + (mu if j == jj else 0)

    def matmul(a, b):
        cols = len(b[0])
        return [
            [sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(cols)]
            for i in range(len(a))
        ]

    mt = [list(row) for row in zip(*mint)]
    lhs = matmul(matmul(mt, hint), mint)
    musq = mu * mu
    return all(
        lhs[i][j] == musq * hint[i][j] for i in range(n) for j in range(n)
    )


@dataclass(frozen=True)
class ConservationAudit:
    """Outcome of an exact conservation run for one alternating-play instance."""

    identity_verified: bool
    steps: int
    checkpoints: int
    conserved: bool
    max_defect: float


def conservation_audit(
    payoff: PayoffData, eta1, eta2, xy0, steps: int, check_every: int = 200
) -> ConservationAudit:
    """Advance an exact orbit and check the quadratic at regular checkpoints.

    The matrix identity already covers every step of every orbit; the
    checkpoint equalities re-confirm it on this orbit's actual integers. Both
    are exact, so max_defect is 0.0 whenever conserved is True.
    """
    if steps < 0 or check_every < 1:
        raise ValueError("steps must be >= 0 and check_every >= 1")
    identity = verify_conservation_identity(payoff, eta1, eta2)
    orbit_exact = ExactAltOrbit(payoff, eta1, eta2, xy0)
    checked = 0
    conserved = True
    max_defect = 0.0
    done = 0
    while done < steps:
        chunk = min(check_every, steps - done)
        orbit_exact.advance(chunk)
        done += chunk
        checked += 1
        if not orbit_exact.phi_matches_start():
            conserved = False
            max_defect = max(max_defect, orbit_exact.phi_defect_float())
    return ConservationAudit(
        identity_verified=identity,
        steps=steps,
        checkpoints=checked,
        conserved=conserved,
        max_defect=max_defect,
    )


def assemble_transition_matrix(payoff: PayoffData, eta1: float, eta2: float) -> np.ndarray:
    """Float64 one-step matrix M with (X', Y') = M (X, Y)."""
    a = payoff.matrix
    dx, dy = payoff.dimension_x, payoff.dimension_y
    m = np.zeros((dx + dy, dx + dy))
    m[:dx, :dx] = np.eye(dx)
    m[:dx, dx:] = eta1 * a
    m[dx:, :dx] = eta2 * a.T
    m[dx:, dx:] = np.eye(dy) + eta1 * eta2 * (a.T @ a)
    return m


def difference_log_stats(
    payoff: PayoffData,
    eta1: float,
    eta2: float,
    diffs: np.ndarray,
    horizon: int,
    *,
    tail_fraction: int = 5,
) -> tuple[np.ndarray, np.ndarray]:
    """Tail liminf/limsup of log2 ||M^t d|| for each difference vector.

    The dynamics is linear, so the distance between two orbits is exactly the
    norm of the evolved difference. Each difference is renormalized every step
    with the accumulated log kept separately, which reaches horizons where the
    raw norms would overflow float64 by thousands of orders of magnitude. The
    tail window is the last max(1, horizon // tail_fraction) steps.

    Returns (liminf_log2, limsup_log2), one entry per row of diffs.
    """
    diffs = np.atleast_2d(np.asarray(diffs, dtype=np.float64))
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    norms = np.linalg.norm(diffs, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("difference vectors must be nonzero")
    u = diffs / norms[:, None]
    logs = np.log2(norms)
    mt = assemble_transition_matrix(payoff, eta1, eta2).T
    tail_start = horizon - max(1, horizon // tail_fraction)
    lim_lo = np.full(len(u), np.inf)
    lim_hi = np.full(len(u), -np.inf)
    for t in range(1, horizon + 1):
        u = u @ mt
        row_norms = np.linalg.norm(u, axis=1)
        logs = logs + np.log2(row_norms)
        u = u / row_norms[:, None]
        if t > tail_start:
            np.minimum(lim_lo, logs, out=lim_lo)
            np.maximum(lim_hi, logs, out=lim_hi)
    return lim_lo, lim_hi
