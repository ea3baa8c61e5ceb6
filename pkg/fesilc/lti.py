"""Single-input single-output LTI algebra, realization and discretization."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm
from scipy.optimize import brentq
from scipy.signal import cont2discrete

from .diagnostics import ModelError
from .models import FloatArray

logger = logging.getLogger(__name__)

# 400 points per decade over [1e-3, 1e4] rad/s
BANDWIDTH_GRID = np.logspace(-3.0, 4.0, 7 * 400 + 1)
BANDWIDTH_XTOL = 1e-6


def _coefficients(values: ArrayLike) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    trimmed = np.trim_zeros(arr, "f")
    if trimmed.size == 0:
        return (0.0,)
    return tuple(float(v) for v in trimmed)


def _frozen(values: ArrayLike, shape: tuple[int, int]) -> FloatArray:
    arr = np.array(values, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TransferFunction:
    """Continuous transfer function num(s)/den(s).

    Coefficients are stored in descending powers of s with leading zeros
    removed. The function must be proper.
    """

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self) -> None:
        num = _coefficients(self.num)
        den = _coefficients(self.den)
        if den == (0.0,):
            raise ModelError("Transfer function denominator is identically zero")
        if any(not math.isfinite(c) for c in num + den):
            raise ModelError("Transfer function coefficients must be finite")
        if len(num) > len(den):
            raise ModelError(
                f"Improper transfer function: numerator degree {len(num) - 1} "
                f"exceeds denominator degree {len(den) - 1}"
            )
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def order(self) -> int:
        """Degree of the denominator."""
        return len(self.den) - 1

    def evaluate(self, s: complex | NDArray[np.complex128]) -> NDArray[np.complex128]:
        """Evaluate the transfer function at complex frequency ``s``."""
        s_arr = np.asarray(s, dtype=complex)
        return np.polyval(self.num, s_arr) / np.polyval(self.den, s_arr)

    def dc_gain(self) -> float:
        """Gain at s = 0; ``inf`` for a free integrator with nonzero numerator."""
        if self.den[-1] != 0.0:
            return self.num[-1] / self.den[-1]
        if self.num[-1] == 0.0:
            return math.nan
        return math.copysign(math.inf, self.num[-1] * self.den[-2])

    def __str__(self) -> str:
        return f"({_poly_str(self.num)}) / ({_poly_str(self.den)})"


def _poly_str(coeffs: Sequence[float]) -> str:
    order = len(coeffs) - 1
    terms = []
    for i, c in enumerate(coeffs):
        power = order - i
        if c == 0.0 and order > 0:
            continue
        if power == 0:
            terms.append(f"{c:.6g}")
        elif power == 1:
            terms.append(f"{c:.6g}s")
        else:
            terms.append(f"{c:.6g}s^{power}")
    return " + ".join(terms) if terms else "0"


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Continuous SISO realization (A, B, C, D)."""

    A: FloatArray
    B: FloatArray
    C: FloatArray
    D: float

    def __post_init__(self) -> None:
        a = np.asarray(self.A, dtype=float)
        n = a.shape[0] if a.ndim == 2 else int(np.sqrt(a.size))
        if a.size != n * n:
            raise ModelError(f"A must be square, got shape {a.shape}")
        b = np.asarray(self.B, dtype=float)
        c = np.asarray(self.C, dtype=float)
        if b.size != n or c.size != n:
            raise ModelError(
                f"Inconsistent realization: A is {n}x{n}, "
                f"B has {b.size} entries, C has {c.size}"
            )
        object.__setattr__(self, "A", _frozen(a, (n, n)))
        object.__setattr__(self, "B", _frozen(b, (n, 1)))
        object.__setattr__(self, "C", _frozen(c, (1, n)))
        object.__setattr__(self, "D", float(self.D))

    @property
    def n_states(self) -> int:
        return int(self.A.shape[0])

    def evaluate(self, s: complex) -> complex:
        """Evaluate C (sI - A)^-1 B + D at a single complex frequency."""
        if self.n_states == 0:
            return complex(self.D)
        resolvent = np.linalg.solve(s * np.eye(self.n_states) - self.A, self.B)
        return complex((self.C @ resolvent)[0, 0] + self.D)


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """Fixed-step discrete SISO realization with sample period ``Ts``."""

    Ad: FloatArray
    Bd: FloatArray
    Cd: FloatArray
    Dd: float
    Ts: float

    def __post_init__(self) -> None:
        if not self.Ts > 0:
            raise ModelError(f"Sample period must be positive, got {self.Ts}")
        n = int(np.asarray(self.Ad).shape[0]) if np.asarray(self.Ad).ndim == 2 else 0
        object.__setattr__(self, "Ad", _frozen(self.Ad, (n, n)))
        object.__setattr__(self, "Bd", _frozen(self.Bd, (n, 1)))
        object.__setattr__(self, "Cd", _frozen(self.Cd, (1, n)))
        object.__setattr__(self, "Dd", float(self.Dd))

    @property
    def n_states(self) -> int:
        return int(self.Ad.shape[0])

    def zero_state(self) -> FloatArray:
        return np.zeros(self.n_states)

    def step(self, x: FloatArray, u: float) -> tuple[float, FloatArray]:
        """Advance one sample; returns the output at this sample and the next state."""
        y = float(self.Cd[0] @ x) + self.Dd * u
        x_next = self.Ad @ x + self.Bd[:, 0] * u
        return y, x_next

    def steady_state(self, u0: float) -> FloatArray:
        """State that holds under a constant input ``u0``."""
        if self.n_states == 0:
            return self.zero_state()
        try:
            return np.linalg.solve(np.eye(self.n_states) - self.Ad, self.Bd[:, 0] * u0)
        except np.linalg.LinAlgError as exc:
            raise ModelError("System has no equilibrium (pole at z = 1)") from exc


@dataclass(frozen=True)
class FrequencyPoint:
    """One sample of a frequency response."""

    omega: float
    magnitude: float
    phase: float


def series(a: TransferFunction, b: TransferFunction) -> TransferFunction:
    """Cascade two transfer functions without pole-zero cancellation."""
    return TransferFunction(
        tuple(np.polymul(a.num, b.num)), tuple(np.polymul(a.den, b.den))
    )


def feedback_unity(forward: TransferFunction) -> TransferFunction:
    """Close a unity negative feedback loop around ``forward``."""
    den = _coefficients(np.polyadd(forward.den, forward.num))
    if den == (0.0,):
        raise ModelError("Closed-loop denominator is identically zero")
    return TransferFunction(forward.num, den)


def to_state_space(tf: TransferFunction) -> StateSpace:
    """Controllable canonical realization of a proper transfer function.

    Args:
        tf: Proper transfer function

    Returns:
        StateSpace with ``tf.order`` states; a static gain yields zero states.
    """
    den = np.asarray(tf.den, dtype=float)
    n = tf.order
    a = den / den[0]
    b = np.zeros(n + 1)
    b[n + 1 - len(tf.num) :] = np.asarray(tf.num) / den[0]
    d = b[0]
    if n == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), d)
    A = np.zeros((n, n))
    A[0, :] = -a[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = (b[1:] - d * a[1:]).reshape(1, n)
    return StateSpace(A, B, C, d)


def cascade(first: StateSpace, second: StateSpace) -> StateSpace:
    """Series realization feeding the output of ``first`` into ``second``.

    The states of ``first`` come first, so its output stays readable as
    ``first.C @ x[:first.n_states]`` when ``first.D`` is zero.
    """
    n1, n2 = first.n_states, second.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, :n1] = second.B @ first.C
    A[n1:, n1:] = second.A
    B = np.vstack([first.B, second.B * first.D])
    C = np.hstack([second.D * first.C, second.C])
    return StateSpace(A, B, C, second.D * first.D)


def discretize_zoh(ss: StateSpace, Ts: float) -> DiscreteSystem:
    """Exact zero-order-hold discretization via the augmented matrix exponential."""
    if not Ts > 0:
        raise ModelError(f"Sample period must be positive, got {Ts}")
    n = ss.n_states
    augmented = np.zeros((n + 1, n + 1))
    augmented[:n, :n] = ss.A
    augmented[:n, n:] = ss.B
    phi = expm(augmented * Ts)
    return DiscreteSystem(phi[:n, :n], phi[:n, n:], ss.C, ss.D, Ts)


def discretize_tustin(ss: StateSpace, Ts: float) -> DiscreteSystem:
    """Bilinear (Tustin) discretization."""
    if not Ts > 0:
        raise ModelError(f"Sample period must be positive, got {Ts}")
    if ss.n_states == 0:
        return DiscreteSystem(ss.A, ss.B, ss.C, ss.D, Ts)
    Ad, Bd, Cd, Dd, _ = cont2discrete(
        (ss.A, ss.B, ss.C, np.array([[ss.D]])), Ts, method="bilinear"
    )
    return DiscreteSystem(Ad, Bd, Cd, float(np.asarray(Dd).item()), Ts)


def tustin_coefficients(
    tf: TransferFunction, Ts: float
) -> tuple[FloatArray, FloatArray]:
    """Digital filter coefficients (b, a) of the bilinear discretization.

    Both are in descending powers of z, ready for ``scipy.signal.lfilter``.
    """
    if not Ts > 0:
        raise ModelError(f"Sample period must be positive, got {Ts}")
    num = np.zeros(len(tf.den))
    num[len(tf.den) - len(tf.num) :] = tf.num
    b, a, _ = cont2discrete((num, np.asarray(tf.den)), Ts, method="bilinear")
    b = np.ravel(b)
    a = np.ravel(a)
    return b / a[0], a / a[0]


def simulate(
    dsys: DiscreteSystem, u: ArrayLike, x0: ArrayLike | None = None
) -> FloatArray:
    """Run a discrete system over an input series.

    Args:
        dsys: Discrete system
        u: Input samples
        x0: Initial state (zeros when omitted)

    Returns:
        Output series of the same length as ``u``.
    """
    inputs = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
    if inputs.size == 0:
        raise ModelError("Input series must contain at least one sample")
    if x0 is None:
        x = dsys.zero_state()
    else:
        x = np.asarray(x0, dtype=float).ravel()
        if x.size != dsys.n_states:
            raise ModelError(
                f"Initial state has {x.size} entries, system has {dsys.n_states}"
            )
    out = np.empty(inputs.size)
    for k, uk in enumerate(inputs):
        out[k], x = dsys.step(x, float(uk))
    return out


def frequency_response(
    tf: TransferFunction, omegas: ArrayLike
) -> list[FrequencyPoint]:
    """Magnitude and unwrapped phase of ``tf`` at the given frequencies (rad/s)."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    values = tf.evaluate(1j * w)
    phases = np.unwrap(np.angle(values))
    return [
        FrequencyPoint(float(om), float(abs(v)), float(ph))
        for om, v, ph in zip(w, values, phases)
    ]


def bandwidth_3db(tf: TransferFunction) -> float:
    """Smallest frequency where the gain falls to |dc|/sqrt(2).

    Raises:
        ModelError: If the DC gain is zero or infinite, or the gain never
            crosses -3 dB inside [1e-3, 1e4] rad/s.
    """
    dc = tf.dc_gain()
    if not math.isfinite(dc) or dc == 0.0:
        raise ModelError(f"Bandwidth needs a finite nonzero DC gain, got {dc}")
    target = abs(dc) / math.sqrt(2.0)
    mags = np.abs(tf.evaluate(1j * BANDWIDTH_GRID))
    below = np.flatnonzero(mags < target)
    if below.size == 0:
        raise ModelError("Gain never crosses -3 dB within [1e-3, 1e4] rad/s")
    i = int(below[0])
    lo = float(BANDWIDTH_GRID[i - 1]) if i > 0 else 0.0
    hi = float(BANDWIDTH_GRID[i])
    omega = brentq(
        lambda w: float(abs(tf.evaluate(1j * w))) - target, lo, hi, xtol=BANDWIDTH_XTOL
    )
    logger.debug("-3 dB crossing of %s at %.6f rad/s", tf, omega)
    return float(omega)
