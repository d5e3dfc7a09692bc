"""A-operators for amplitude estimation and the matching Grover operator.

Every builder returns an :class:`AOperator` whose objective qubit's |1>
probability encodes either a probability directly (``kind="probability"``)
or a payoff expectation through the sin^2 linearisation
``sin^2(gamma*z + pi/4) ~ gamma*z + 1/2`` (``kind="payoff"``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import DiscretizedDistribution, loader_gates
from .errors import ConfigurationError, DegenerateInputError
from .sim import (
    ON_ONE,
    ON_ZERO,
    Circuit,
    ControlledNot,
    ControlledRotationY,
    GlobalPhase,
    MultiControlledX,
    PauliX,
    PhaseShift,
    RegisterLayout,
    RotationY,
)

GEQ = "geq"
LT = "lt"


@dataclass(frozen=True)
class ComparatorSpec:
    """``geq`` marks i >= k (cmp1), ``lt`` marks i < k (cmp2)."""

    k: int
    direction: str = GEQ

    def __post_init__(self):
        if self.direction not in (GEQ, LT):
            raise ConfigurationError(f"unknown comparator direction {self.direction!r}")


@dataclass(frozen=True)
class ExpectileParams:
    alpha: float
    breakpoint: int
    n_qubits: int

    def __post_init__(self):
        if not 0.5 <= self.alpha < 1:
            raise ConfigurationError(f"expectile operator needs alpha in [1/2, 1), got {self.alpha}")
        if not 0 <= self.breakpoint < 2**self.n_qubits:
            raise ConfigurationError(f"breakpoint {self.breakpoint} outside the grid")

    @property
    def slope(self) -> float:
        """(2 alpha - 1) / (1 - alpha)."""
        return (2 * self.alpha - 1) / (1 - self.alpha)

    def x_star(self, dist: DiscretizedDistribution) -> float:
        return dist.value(self.breakpoint)


@dataclass(frozen=True)
class AOperator:
    circuit: Circuit
    objective_qubit: int
    gamma: float
    f_min: float
    f_max: float
    window_mass_required: bool = False
    kind: str = "payoff"

    def __post_init__(self):
        if not self.f_min < self.f_max:
            raise DegenerateInputError(f"payoff range [{self.f_min}, {self.f_max}] is empty")
        if not 0 <= self.gamma <= 1:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def layout(self) -> RegisterLayout:
        return self.circuit.layout

    @property
    def payoff_range(self) -> float:
        return self.f_max - self.f_min

    def invert(self, amplitude: float) -> float:
        """Map an estimated amplitude back to the expectation it linearly encodes."""
        if self.kind == "probability":
            return amplitude
        return ((amplitude - 0.5) / (2 * self.gamma) + 0.5) * self.payoff_range + self.f_min

    def invert_windowed(self, amplitude: float, mass: float) -> float:
        """Recover S = sum_window p_i f(i) from a window-restricted amplitude.

        Solves amplitude = gamma * (2 (S - mass f_min) / range - mass) + mass / 2.
        """
        return ((amplitude - mass / 2) / self.gamma + mass) * self.payoff_range / 2 + mass * self.f_min


# --------------------------------------------------------------------------
# comparators
# --------------------------------------------------------------------------


def comparator_gates(
    qubits: Sequence[int],
    result: int,
    ancillas: Sequence[int],
    spec: ComparatorSpec,
) -> list:
    """Ripple-carry threshold test writing [i >= k] or [i < k] onto ``result``.

    ``i + (2**n - k)`` overflows exactly when i >= k; the carries are computed
    on ``n - 1`` ancillas with Toffoli (AND) and negated-Toffoli (OR) steps,
    the last carry lands on ``result`` and the ancillas are uncomputed.
    """
    n = len(qubits)
    if len(ancillas) != n - 1:
        raise ConfigurationError(f"comparator on {n} qubits needs {n - 1} ancillas")
    k = spec.k
    if not 0 <= k <= 2**n:
        raise ConfigurationError(f"comparator threshold {k} outside [0, {2**n}]")

    flip = [PauliX(result)] if spec.direction == LT else []
    if k == 0:
        # i >= 0 always
        return [] if spec.direction == LT else [PauliX(result)]
    if k == 2**n:
        return flip

    twos = 2**n - k
    carries = list(ancillas) + [result]
    compute = []
    for j in range(n):
        bit = (twos >> j) & 1
        target = carries[j]
        step = []
        if j == 0:
            if bit:
                step.append(ControlledNot(qubits[0], target))
        elif bit:
            step += [
                MultiControlledX(((qubits[j], ON_ZERO), (carries[j - 1], ON_ZERO)), target),
                PauliX(target),
            ]
        else:
            step.append(MultiControlledX(((qubits[j], ON_ONE), (carries[j - 1], ON_ONE)), target))
        compute.append(step)

    gates = [g for step in compute for g in step]
    for step in reversed(compute[:-1]):
        gates += [g.inverse() for g in reversed(step)]
    return gates + flip


def comparator(n: int, spec: ComparatorSpec) -> Circuit:
    """Stand-alone comparator on a fresh ``n``-qubit register."""
    layout = RegisterLayout.build(
        ("distribution", n), ("comparator-result-1", 1), ("comparator-ancilla-1", n - 1)
    )
    anc = list(layout["comparator-ancilla-1"]) if n > 1 else []
    return Circuit(
        layout,
        comparator_gates(list(layout["distribution"]), layout.qubit("comparator-result-1"), anc, spec),
    )


def _ancillas(layout: RegisterLayout, role: str) -> list[int]:
    return list(layout[role]) if role in layout else []


def _linear_rotation(qubits, objective, controls, slope, offset) -> list:
    """Rotate ``objective`` by R_y(2 (slope*i + offset)) given ``controls``.

    The linear angle splits into one rotation per bit of i, each additionally
    controlled on that bit.
    """
    controls = tuple(controls)
    gates = []
    if offset != 0.0:
        if controls:
            gates.append(ControlledRotationY(controls, objective, 2 * offset))
        else:
            gates.append(RotationY(objective, 2 * offset))
    for j, q in enumerate(qubits):
        angle = 2 * slope * 2**j
        if angle != 0.0:
            gates.append(ControlledRotationY(controls + ((q, ON_ONE),), objective, angle))
    return gates


# --------------------------------------------------------------------------
# A-operators
# --------------------------------------------------------------------------


def expectile_a_operator(dist: DiscretizedDistribution, params: ExpectileParams, gamma: float) -> AOperator:
    """Payoff max{(1+beta) X - beta x*, X} with the breakpoint resolved by a comparator."""
    if not 0 < gamma <= 1:
        raise ConfigurationError(f"gamma must lie in (0, 1], got {gamma}")
    n = dist.n_qubits
    if params.n_qubits != n:
        raise ConfigurationError("expectile parameters and distribution disagree on n")
    beta = params.slope
    istar = params.breakpoint
    top = dist.size - 1
    f_min = dist.a
    f_max = dist.a + (1 + beta) * dist.b * top - beta * dist.b * istar
    denom = f_max - f_min
    if not denom > 0:
        raise DegenerateInputError("expectile payoff range collapsed")

    layout = RegisterLayout.build(
        ("distribution", n),
        ("comparator-result-1", 1),
        ("comparator-ancilla-1", n - 1),
        ("objective", 1),
    )
    qubits = list(layout["distribution"])
    flag = layout.qubit("comparator-result-1")
    obj = layout.qubit("objective")

    circ = Circuit(layout, loader_gates(dist.probs, qubits))
    circ.extend(comparator_gates(qubits, flag, _ancillas(layout, "comparator-ancilla-1"), ComparatorSpec(istar, GEQ)))
    # g0(i) = 2 gamma b i / denom - gamma + pi/4 on every branch
    circ.extend(_linear_rotation(qubits, obj, (), 2 * gamma * dist.b / denom, np.pi / 4 - gamma))
    # g1(i) = 2 gamma beta b (i - i*) / denom once i >= i*
    s1 = 2 * gamma * beta * dist.b / denom
    circ.extend(_linear_rotation(qubits, obj, ((flag, ON_ONE),), s1, -s1 * istar))
    return AOperator(circ, obj, gamma, f_min, f_max)


def _window_rotation(dist, gamma):
    """Slope/offset of g_hat(i) = gamma * (2 i / (2**n - 1) - 1) + pi/4."""
    return 2 * gamma / (dist.size - 1), np.pi / 4 - gamma


def rvar_a_operator(dist: DiscretizedDistribution, k1: int, k2: int, gamma: float) -> AOperator:
    """Linear payoff on the window k2 <= i <= k1, selected by cmp1(k2) and cmp2(k1 + 1)."""
    if not 0 < gamma <= 1:
        raise ConfigurationError(f"gamma must lie in (0, 1], got {gamma}")
    top = dist.size - 1
    if not 0 <= k2 <= k1 <= top:
        raise ConfigurationError(f"need 0 <= k2 <= k1 <= {top}, got k2={k2}, k1={k1}")
    layout = _two_comparator_layout(dist.n_qubits, objective=True)
    qubits, t1, t2 = list(layout["distribution"]), layout.qubit("comparator-result-1"), layout.qubit("comparator-result-2")
    obj = layout.qubit("objective")
    circ = _two_comparator_circuit(dist, layout, k2, k1)
    slope, offset = _window_rotation(dist, gamma)
    circ.extend(_linear_rotation(qubits, obj, ((t1, ON_ONE), (t2, ON_ONE)), slope, offset))
    return AOperator(circ, obj, gamma, dist.lo, dist.hi, window_mass_required=True)


def _two_comparator_layout(n, objective):
    roles = [
        ("distribution", n),
        ("comparator-result-1", 1),
        ("comparator-ancilla-1", n - 1),
        ("comparator-result-2", 1),
        ("comparator-ancilla-2", n - 1),
    ]
    if objective:
        roles.append(("objective", 1))
    return RegisterLayout.build(*roles)


def _two_comparator_circuit(dist, layout, lo, hi):
    qubits = list(layout["distribution"])
    circ = Circuit(layout, loader_gates(dist.probs, qubits))
    circ.extend(comparator_gates(
        qubits, layout.qubit("comparator-result-1"), _ancillas(layout, "comparator-ancilla-1"),
        ComparatorSpec(lo, GEQ),
    ))
    circ.extend(comparator_gates(
        qubits, layout.qubit("comparator-result-2"), _ancillas(layout, "comparator-ancilla-2"),
        ComparatorSpec(hi + 1, LT),
    ))
    return circ


def window_a_operator(dist: DiscretizedDistribution, k_lo: int, k_hi: int) -> AOperator:
    """Objective marks k_lo <= i <= k_hi; amplitude is the window mass."""
    top = dist.size - 1
    if not 0 <= k_lo <= k_hi <= top:
        raise ConfigurationError(f"need 0 <= k_lo <= k_hi <= {top}, got {k_lo}, {k_hi}")
    layout = _two_comparator_layout(dist.n_qubits, objective=True)
    circ = _two_comparator_circuit(dist, layout, k_lo, k_hi)
    obj = layout.qubit("objective")
    circ.append(MultiControlledX(
        ((layout.qubit("comparator-result-1"), ON_ONE), (layout.qubit("comparator-result-2"), ON_ONE)), obj
    ))
    return AOperator(circ, obj, 1.0, 0.0, 1.0, kind="probability")


def cdf_a_operator(dist: DiscretizedDistribution, k: int, tail: bool = False) -> AOperator:
    """Comparator-only operator: amplitude P(i < k), or P(i >= k) when ``tail``."""
    n = dist.n_qubits
    if not 0 <= k <= dist.size:
        raise ConfigurationError(f"threshold {k} outside [0, {dist.size}]")
    layout = RegisterLayout.build(("distribution", n), ("objective", 1), ("comparator-ancilla-1", n - 1))
    qubits = list(layout["distribution"])
    obj = layout.qubit("objective")
    circ = Circuit(layout, loader_gates(dist.probs, qubits))
    circ.extend(comparator_gates(
        qubits, obj, _ancillas(layout, "comparator-ancilla-1"), ComparatorSpec(k, GEQ if tail else LT)
    ))
    return AOperator(circ, obj, 1.0, 0.0, 1.0, kind="probability")


def cvar_a_operator(dist: DiscretizedDistribution, k: int, gamma: float) -> AOperator:
    """Linear payoff on the tail window i >= k."""
    if not 0 < gamma <= 1:
        raise ConfigurationError(f"gamma must lie in (0, 1], got {gamma}")
    n = dist.n_qubits
    if not 0 <= k <= dist.size - 1:
        raise ConfigurationError(f"tail start {k} outside the grid")
    layout = RegisterLayout.build(
        ("distribution", n),
        ("comparator-result-1", 1),
        ("comparator-ancilla-1", n - 1),
        ("objective", 1),
    )
    qubits = list(layout["distribution"])
    flag, obj = layout.qubit("comparator-result-1"), layout.qubit("objective")
    circ = Circuit(layout, loader_gates(dist.probs, qubits))
    circ.extend(comparator_gates(qubits, flag, _ancillas(layout, "comparator-ancilla-1"), ComparatorSpec(k, GEQ)))
    slope, offset = _window_rotation(dist, gamma)
    circ.extend(_linear_rotation(qubits, obj, ((flag, ON_ONE),), slope, offset))
    return AOperator(circ, obj, gamma, dist.lo, dist.hi, window_mass_required=True)


# --------------------------------------------------------------------------
# Grover operator
# --------------------------------------------------------------------------


def reflection_zero(layout: RegisterLayout, pivot: int = 0) -> list:
    """I - 2|0...0><0...0| over the whole register."""
    others = tuple((q, ON_ZERO) for q in range(layout.total_qubits) if q != pivot)
    return [PauliX(pivot), PhaseShift(pivot, np.pi, others), PauliX(pivot)]


def grover_operator(a_op: AOperator) -> Circuit:
    """Q = -A S0 A^dagger S_chi, which rotates by 2*theta_a in the good/bad plane.

    The explicit global phase of -1 is what makes controlled powers of Q
    encode the eigenphases +-2 theta_a that phase estimation reads out.
    """
    layout = a_op.layout
    q = Circuit(layout)
    q.append(PhaseShift(a_op.objective_qubit, np.pi))  # S_chi
    q.extend(a_op.circuit.inverse().gates)
    q.extend(reflection_zero(layout, a_op.objective_qubit))
    q.extend(a_op.circuit.gates)
    q.append(GlobalPhase(np.pi))
    return q
