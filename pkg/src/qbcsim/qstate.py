"""Exact two-qubit statevector engine for one internal register entangled with
one polarization-encoded photon.

Conventions used throughout the package:

- A polarization ket carries a basis bit p (0 = rectilinear, 1 = diagonal) and
  a value bit q.  In the computational (0deg/90deg) frame the four kets are
  the linear-polarization angles 0, 45, 90, 135 degrees:
      (p=0,q=0) -> (1, 0)          (p=0,q=1) -> (0, 1)
      (p=1,q=0) -> (1, 1)/sqrt2    (p=1,q=1) -> (-1, 1)/sqrt2
  The sign of the 135deg ket is fixed as (-1, 1)/sqrt2.
- The internal register ("alpha") has orthonormal basis states |x>, |y>.
- A PairState stores the four joint amplitudes over (alpha tensor photon) as
  a flat tuple (x&0deg, x&90deg, y&0deg, y&90deg).  The entangled preparation
  with angle theta and value bit q is
      cos(theta)|x>|0,q> + sin(theta)|y>|1,q> ,   theta in (0, pi/2) open.
- States are immutable values.  A measurement never mutates its input; it
  returns the sampled outcome together with a fresh collapsed state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RandomStream = np.random.Generator

ALPHA_X = 0
ALPHA_Y = 1

# Constructors keep amplitudes normalized to this tolerance; measurement
# re-normalizes explicitly so accumulated float error stays ~1e-15.
_NORM_TOL = 1e-9


class StateError(ValueError):
    """Malformed state, bad parameter, or normalization failure."""


def _require_finite(*values: complex) -> None:
    for z in values:
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise StateError("non-finite amplitude")


@dataclass(frozen=True, slots=True)
class QubitState:
    """Pure state of a single two-level system in a declared basis."""

    a0: complex
    a1: complex

    def __post_init__(self) -> None:
        a0, a1 = complex(self.a0), complex(self.a1)
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "a1", a1)
        _require_finite(a0, a1)
        n = abs(a0) ** 2 + abs(a1) ** 2
        if abs(n - 1.0) > _NORM_TOL:
            raise StateError(f"qubit not normalized: |a|^2 = {n!r}")

    def amplitudes(self) -> tuple[complex, complex]:
        return (self.a0, self.a1)

    def probabilities(self) -> tuple[float, float]:
        return (abs(self.a0) ** 2, abs(self.a1) ** 2)


def unit_qubit(a0: complex, a1: complex) -> QubitState:
    """Build a QubitState from an unnormalized amplitude pair."""
    n = math.sqrt(abs(a0) ** 2 + abs(a1) ** 2)
    if n < 1e-150:
        raise StateError("cannot normalize the zero vector")
    return QubitState(a0 / n, a1 / n)


_KETS = {
    (0, 0): (1.0, 0.0),
    (0, 1): (0.0, 1.0),
    (1, 0): (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)),
    (1, 1): (-1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)),
}


def pol_ket(p: int, q: int) -> QubitState:
    """Polarization ket for basis bit p and value bit q (see module docstring)."""
    try:
        a0, a1 = _KETS[(int(p), int(q))]
    except KeyError:
        raise StateError(f"basis and value bits must be 0 or 1, got ({p}, {q})")
    return QubitState(a0, a1)


def orthogonal(state: QubitState) -> QubitState:
    """The unique (up to phase) qubit state orthogonal to the given one."""
    return QubitState(-state.a1.conjugate(), state.a0.conjugate())


def overlap(a: QubitState, b: QubitState) -> complex:
    """Inner product <a|b>."""
    return a.a0.conjugate() * b.a0 + a.a1.conjugate() * b.a1


def canonical_phase(state: QubitState) -> QubitState:
    """Rotate the global phase so the first non-negligible amplitude is real positive."""
    lead = state.a0 if abs(state.a0) > 1e-12 else state.a1
    phase = lead / abs(lead)
    return QubitState(state.a0 / phase, state.a1 / phase)


@dataclass(frozen=True, slots=True)
class PairState:
    """Joint pure state of (alpha register) tensor (photon).

    amp = (x&0deg, x&90deg, y&0deg, y&90deg) in the computational photon frame.
    """

    amp: tuple[complex, complex, complex, complex]

    def __post_init__(self) -> None:
        amp = tuple(complex(z) for z in self.amp)
        if len(amp) != 4:
            raise StateError("PairState needs exactly 4 amplitudes")
        object.__setattr__(self, "amp", amp)
        _require_finite(*amp)
        n = sum(abs(z) ** 2 for z in amp)
        if abs(n - 1.0) > _NORM_TOL:
            raise StateError(f"pair state not normalized: |a|^2 = {n!r}")

    def to_reals(self) -> list[float]:
        """Serialize to 8 reals, amplitudes ordered (x,0),(y,0),(x,90),(y,90),
        real and imaginary part interleaved."""
        out: list[float] = []
        for idx in (0, 2, 1, 3):
            z = self.amp[idx]
            out.append(z.real)
            out.append(z.imag)
        return out

    @classmethod
    def from_reals(cls, reals: list[float]) -> "PairState":
        if len(reals) != 8:
            raise StateError("pair state serialization needs 8 reals")
        zs = [complex(reals[2 * i], reals[2 * i + 1]) for i in range(4)]
        # undo the (x,0),(y,0),(x,90),(y,90) wire order
        return cls((zs[0], zs[2], zs[1], zs[3]))


def tensor(alpha: QubitState, photon: QubitState) -> PairState:
    """Product state alpha tensor photon."""
    return PairState(
        (
            alpha.a0 * photon.a0,
            alpha.a0 * photon.a1,
            alpha.a1 * photon.a0,
            alpha.a1 * photon.a1,
        )
    )


def prepare_pair(theta: float, q: int) -> PairState:
    """Entangled preparation cos(theta)|x>|0,q> + sin(theta)|y>|1,q>.

    theta must lie strictly inside (0, pi/2); the endpoints would be product
    states and are rejected rather than silently allowed.
    """
    if not (0.0 < theta < math.pi / 2.0):
        raise StateError(f"theta must be in the open interval (0, pi/2), got {theta}")
    k0 = pol_ket(0, q)
    k1 = pol_ket(1, q)
    c, s = math.cos(theta), math.sin(theta)
    return PairState(
        (
            c * k0.a0,
            c * k0.a1,
            s * k1.a0,
            s * k1.a1,
        )
    )


def pair_overlap(a: PairState, b: PairState) -> complex:
    """Inner product <a|b> of two joint states."""
    return sum(x.conjugate() * y for x, y in zip(a.amp, b.amp))


def _alpha_components(state: PairState, photon: QubitState) -> tuple[complex, complex]:
    """Unnormalized alpha amplitudes after projecting the photon onto `photon`."""
    k0, k1 = photon.a0.conjugate(), photon.a1.conjugate()
    ax = state.amp[0] * k0 + state.amp[1] * k1
    ay = state.amp[2] * k0 + state.amp[3] * k1
    return ax, ay


def _photon_components(state: PairState, alpha: QubitState) -> tuple[complex, complex]:
    """Unnormalized photon amplitudes after projecting alpha onto `alpha`."""
    b0, b1 = alpha.a0.conjugate(), alpha.a1.conjugate()
    p0 = b0 * state.amp[0] + b1 * state.amp[2]
    p1 = b0 * state.amp[1] + b1 * state.amp[3]
    return p0, p1


def born_probabilities_photon(state: PairState, basis: int) -> tuple[float, float]:
    """Outcome probabilities (value 0, value 1) for a photon measurement in `basis`."""
    probs = []
    for value in (0, 1):
        ax, ay = _alpha_components(state, pol_ket(basis, value))
        probs.append(abs(ax) ** 2 + abs(ay) ** 2)
    total = probs[0] + probs[1]
    return (probs[0] / total, probs[1] / total)


def measure_photon(state: PairState, basis: int, rng: RandomStream) -> tuple[int, PairState]:
    """Projectively measure the photon in polarization basis `basis`.

    Parameters
    ----------
    state : PairState
        Joint state before measurement (not modified).
    basis : int
        0 for rectilinear, 1 for diagonal.
    rng : numpy Generator
        Source of the Born-rule sample.

    Returns
    -------
    (outcome, collapsed) : the sampled value bit and the post-measurement
    product state, whose alpha factor is the exact conditional state.
    """
    comps = [_alpha_components(state, pol_ket(basis, v)) for v in (0, 1)]
    p0 = abs(comps[0][0]) ** 2 + abs(comps[0][1]) ** 2
    p1 = abs(comps[1][0]) ** 2 + abs(comps[1][1]) ** 2
    total = p0 + p1
    outcome = 0 if rng.random() * total < p0 else 1
    ax, ay = comps[outcome]
    alpha = unit_qubit(ax, ay)
    return outcome, tensor(alpha, pol_ket(basis, outcome))


def measure_alpha(state: PairState, rng: RandomStream) -> tuple[int, PairState]:
    """Measure the alpha register in its computational (|x>, |y>) basis.

    Returns (outcome, collapsed) where outcome 0 means |x| and 1 means |y>;
    the photon factor of the collapsed state is the exact conditional state.
    """
    px = abs(state.amp[0]) ** 2 + abs(state.amp[1]) ** 2
    py = abs(state.amp[2]) ** 2 + abs(state.amp[3]) ** 2
    total = px + py
    outcome = 0 if rng.random() * total < px else 1
    if outcome == 0:
        photon = unit_qubit(state.amp[0], state.amp[1])
        alpha = QubitState(1.0, 0.0)
    else:
        photon = unit_qubit(state.amp[2], state.amp[3])
        alpha = QubitState(0.0, 1.0)
    return outcome, tensor(alpha, photon)


def measure_alpha_in(
    state: PairState, basis0: QubitState, rng: RandomStream
) -> tuple[int, PairState]:
    """Measure the alpha register in the orthonormal basis (basis0, basis0-perp).

    Outcome 0 reports projection onto basis0.  Works on entangled and product
    states alike; the photon factor collapses to the matching conditional state.
    """
    basis1 = orthogonal(basis0)
    c0 = _photon_components(state, basis0)
    c1 = _photon_components(state, basis1)
    p0 = abs(c0[0]) ** 2 + abs(c0[1]) ** 2
    p1 = abs(c1[0]) ** 2 + abs(c1[1]) ** 2
    total = p0 + p1
    outcome = 0 if rng.random() * total < p0 else 1
    vec, comp = (basis0, c0) if outcome == 0 else (basis1, c1)
    return outcome, tensor(vec, unit_qubit(*comp))


def measure_in_basis(state: QubitState, basis0: QubitState, rng: RandomStream) -> int:
    """Two-outcome measurement of a lone qubit; 0 means it matched basis0."""
    p0 = abs(overlap(basis0, state)) ** 2
    return 0 if rng.random() < p0 else 1


def measure_pair_in_state(
    state: PairState, reference: PairState, rng: RandomStream
) -> tuple[int, PairState]:
    """Binary projective test of the joint state against a reference state.

    Outcome 0 means the state passed (projected onto the reference); outcome 1
    projects onto the orthogonal complement within the 4-dim joint space.
    """
    ov = pair_overlap(reference, state)
    p_match = abs(ov) ** 2
    if rng.random() < p_match:
        return 0, reference
    residual = tuple(a - ov * r for a, r in zip(state.amp, reference.amp))
    norm = math.sqrt(sum(abs(z) ** 2 for z in residual))
    if norm < 1e-150:
        # probability of reaching this branch is < 1e-300; keep it safe anyway
        return 0, reference
    return 1, PairState(tuple(z / norm for z in residual))


def schmidt_coefficients(state: PairState) -> tuple[float, float]:
    """Descending singular values (l1, l2) of the 2x2 amplitude matrix.

    l1^2 + l2^2 = 1; l2 = 0 exactly characterizes product states.  Uses the
    closed 2x2 form: l1 l2 = |det|, l1^2 + l2^2 = trace of A A-dagger.
    """
    a, b, c, d = state.amp
    t = abs(a) ** 2 + abs(b) ** 2 + abs(c) ** 2 + abs(d) ** 2
    det = abs(a * d - b * c)
    disc = max(t * t - 4.0 * det * det, 0.0)
    root = math.sqrt(disc)
    l1 = math.sqrt((t + root) / 2.0)
    l2 = math.sqrt(max((t - root) / 2.0, 0.0))
    return (l1, l2)


def is_product(state: PairState, tol: float = 1e-9) -> bool:
    """True when the smaller Schmidt coefficient is below tol."""
    return schmidt_coefficients(state)[1] < tol


def factor_product(state: PairState, tol: float = 1e-9) -> tuple[QubitState, QubitState]:
    """Split a product state into (alpha, photon) factors.

    Raises StateError when the state is entangled beyond tol.  The factors are
    unique up to opposite global phases.
    """
    if not is_product(state, tol):
        raise StateError("state is entangled; no product factorization exists")
    a, b, c, d = state.amp
    nx = abs(a) ** 2 + abs(b) ** 2
    ny = abs(c) ** 2 + abs(d) ** 2
    photon = unit_qubit(a, b) if nx >= ny else unit_qubit(c, d)
    ax = photon.a0.conjugate() * a + photon.a1.conjugate() * b
    ay = photon.a0.conjugate() * c + photon.a1.conjugate() * d
    return unit_qubit(ax, ay), photon


def expected_alpha_after_photon(theta: float, q: int, basis: int, outcome: int) -> QubitState:
    """Conditional alpha state of the standard preparation given a photon result.

    This is the state the register must hold once the photon of
    prepare_pair(theta, q) was measured in `basis` with result `outcome`.
    """
    state = prepare_pair(theta, q)
    ax, ay = _alpha_components(state, pol_ket(basis, outcome))
    return unit_qubit(ax, ay)


def states_equal_up_to_phase(a: QubitState, b: QubitState, tol: float = 1e-12) -> bool:
    return abs(abs(overlap(a, b)) - 1.0) <= tol


def pairs_equal_up_to_phase(a: PairState, b: PairState, tol: float = 1e-12) -> bool:
    return abs(abs(pair_overlap(a, b)) - 1.0) <= tol
