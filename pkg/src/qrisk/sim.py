"""Dense state-vector simulation for the small gate set the risk circuits need.

Qubit ``q`` is bit ``q`` of the basis index (little endian).  Internally the
amplitude vector is viewed as a rank-``N`` tensor of shape ``(2,) * N`` where
qubit ``q`` lives on axis ``N - 1 - q``; controlled operations act on basic
slices of that tensor, so a gate with ``c`` controls touches ``2**(N - c)``
amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ResourceError

MAX_QUBITS = 24
RNG_ALGORITHM = "numpy.PCG64"

ROLE_NAMES = (
    "distribution",
    "comparator-result-1",
    "comparator-ancilla-1",
    "comparator-result-2",
    "comparator-ancilla-2",
    "objective",
    "estimation-ancilla",
)

ON_ONE = 1
ON_ZERO = 0


@dataclass(frozen=True)
class RegisterLayout:
    """Named, contiguous, disjoint qubit ranges covering the whole register."""

    total_qubits: int
    roles: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        if self.total_qubits > MAX_QUBITS:
            raise ResourceError(
                f"{self.total_qubits} qubits exceed the simulator budget of {MAX_QUBITS}"
            )
        covered = []
        names = set()
        for name, start, size in self.roles:
            if name not in ROLE_NAMES:
                raise ConfigurationError(f"unknown register role {name!r}")
            if name in names:
                raise ConfigurationError(f"duplicate register role {name!r}")
            if size < 1 or start < 0:
                raise ConfigurationError(f"role {name!r} has an empty or negative range")
            names.add(name)
            covered.extend(range(start, start + size))
        if sorted(covered) != list(range(self.total_qubits)):
            raise ConfigurationError("register roles must be disjoint and cover every qubit")

    @classmethod
    def build(cls, *sizes: tuple[str, int]) -> "RegisterLayout":
        """Lay out roles consecutively from qubit 0; zero-size roles are dropped."""
        roles = []
        start = 0
        for name, size in sizes:
            if size == 0:
                continue
            roles.append((name, start, size))
            start += size
        return cls(start, tuple(roles))

    @property
    def named_roles(self) -> dict[str, range]:
        return {name: range(start, start + size) for name, start, size in self.roles}

    def __contains__(self, name: str) -> bool:
        return any(r[0] == name for r in self.roles)

    def __getitem__(self, name: str) -> range:
        for role, start, size in self.roles:
            if role == name:
                return range(start, start + size)
        raise KeyError(name)

    def qubit(self, name: str) -> int:
        rng = self[name]
        if len(rng) != 1:
            raise ConfigurationError(f"role {name!r} spans {len(rng)} qubits, expected one")
        return rng.start

    def extend(self, name: str, size: int) -> "RegisterLayout":
        """Append a new role above the existing qubits."""
        return RegisterLayout(
            self.total_qubits + size,
            self.roles + ((name, self.total_qubits, size),),
        )


# --------------------------------------------------------------------------
# gates
# --------------------------------------------------------------------------

Controls = tuple[tuple[int, int], ...]


def _controls(controls: Iterable) -> Controls:
    out = []
    for c in controls:
        if isinstance(c, (int, np.integer)):
            out.append((int(c), ON_ONE))
        else:
            q, pol = c
            if pol not in (ON_ZERO, ON_ONE):
                raise ConfigurationError(f"control polarity must be 0 or 1, got {pol}")
            out.append((int(q), int(pol)))
    return tuple(out)


@dataclass(frozen=True)
class Hadamard:
    target: int

    def inverse(self):
        return self

    def qubits(self):
        return (self.target,)


@dataclass(frozen=True)
class PauliX:
    target: int

    def inverse(self):
        return self

    def qubits(self):
        return (self.target,)


@dataclass(frozen=True)
class RotationY:
    target: int
    angle: float

    def inverse(self):
        return RotationY(self.target, -self.angle)

    def qubits(self):
        return (self.target,)


@dataclass(frozen=True)
class ControlledRotationY:
    controls: Controls
    target: int
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "controls", _controls(self.controls))

    def inverse(self):
        return ControlledRotationY(self.controls, self.target, -self.angle)

    def qubits(self):
        return tuple(q for q, _ in self.controls) + (self.target,)


@dataclass(frozen=True)
class ControlledNot:
    control: int
    target: int

    def inverse(self):
        return self

    def qubits(self):
        return (self.control, self.target)


@dataclass(frozen=True)
class MultiControlledX:
    controls: Controls
    target: int

    def __post_init__(self):
        object.__setattr__(self, "controls", _controls(self.controls))

    def inverse(self):
        return self

    def qubits(self):
        return tuple(q for q, _ in self.controls) + (self.target,)


@dataclass(frozen=True)
class PhaseShift:
    """diag(1, e^{i angle}) on ``target``, optionally controlled."""

    target: int
    angle: float
    controls: Controls = ()

    def __post_init__(self):
        object.__setattr__(self, "controls", _controls(self.controls))

    def inverse(self):
        return PhaseShift(self.target, -self.angle, self.controls)

    def qubits(self):
        return tuple(q for q, _ in self.controls) + (self.target,)


@dataclass(frozen=True)
class GlobalPhase:
    # Becomes a relative phase once wrapped in ControlledUnitary.
    angle: float

    def inverse(self):
        return GlobalPhase(-self.angle)

    def qubits(self):
        return ()


@dataclass(frozen=True)
class QFT:
    """Fourier transform on ``qubits`` (listed least significant first)."""

    qubits_: tuple[int, ...]
    inverse_: bool = False

    def __post_init__(self):
        object.__setattr__(self, "qubits_", tuple(int(q) for q in self.qubits_))

    def inverse(self):
        return QFT(self.qubits_, not self.inverse_)

    def qubits(self):
        return self.qubits_


def InverseQFT(qubits: Sequence[int]) -> QFT:
    return QFT(tuple(qubits), True)


@dataclass(frozen=True)
class ControlledUnitary:
    control: int
    circuit: "Circuit"
    polarity: int = ON_ONE

    def inverse(self):
        return ControlledUnitary(self.control, self.circuit.inverse(), self.polarity)

    def qubits(self):
        inner = set()
        for g in self.circuit.gates:
            inner.update(g.qubits())
        return (self.control,) + tuple(sorted(inner))


Gate = Union[
    Hadamard,
    PauliX,
    RotationY,
    ControlledRotationY,
    ControlledNot,
    MultiControlledX,
    PhaseShift,
    GlobalPhase,
    QFT,
    ControlledUnitary,
]


@dataclass
class Circuit:
    layout: RegisterLayout
    gates: list = field(default_factory=list)

    def append(self, gate) -> "Circuit":
        for q in gate.qubits():
            if not 0 <= q < self.layout.total_qubits:
                raise ConfigurationError(
                    f"gate {gate!r} touches qubit {q} outside a "
                    f"{self.layout.total_qubits}-qubit layout"
                )
        if isinstance(gate, ControlledUnitary) and gate.control in gate.qubits()[1:]:
            raise ConfigurationError("controlled unitary may not act on its own control")
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def compose(self, other: "Circuit") -> "Circuit":
        """Append ``other``'s gates; its layout must fit inside this one."""
        if other.layout.total_qubits > self.layout.total_qubits:
            raise ConfigurationError("cannot compose a wider circuit into a narrower one")
        return self.extend(other.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.layout, [g.inverse() for g in reversed(self.gates)])

    def power(self, k: int) -> "Circuit":
        return Circuit(self.layout, list(self.gates) * k)

    def widen(self, layout: RegisterLayout) -> "Circuit":
        if layout.roles[: len(self.layout.roles)] != self.layout.roles:
            raise ConfigurationError("new layout must extend the existing one")
        return Circuit(layout, list(self.gates))

    def __len__(self):
        return len(self.gates)


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.layout.total_qubits,):
            raise ConfigurationError("amplitude vector does not match the layout size")
        norm = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if abs(norm - 1.0) > 1e-10:
            raise ConfigurationError(f"state is not normalised (|psi|^2 = {norm})")

    @property
    def num_qubits(self) -> int:
        return self.layout.total_qubits

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))


def zero_state(layout: RegisterLayout) -> QuantumState:
    amps = np.zeros(2**layout.total_qubits, dtype=complex)
    amps[0] = 1.0
    return QuantumState(amps, layout)


def basis_state(layout: RegisterLayout, index: int) -> QuantumState:
    amps = np.zeros(2**layout.total_qubits, dtype=complex)
    amps[index] = 1.0
    return QuantumState(amps, layout)


def _slice_controls(t: np.ndarray, axis_of: Mapping[int, int], controls: Controls):
    """Fix control axes to their polarity; return the view and the remapped axes."""
    if not controls:
        return t, axis_of
    idx = [slice(None)] * t.ndim
    removed = []
    for q, pol in controls:
        ax = axis_of[q]
        idx[ax] = pol
        removed.append(ax)
    sub = t[tuple(idx)]
    removed.sort()
    fixed = {q for q, _ in controls}
    new_axis = {}
    for q, ax in axis_of.items():
        if q in fixed:
            continue
        new_axis[q] = ax - sum(1 for r in removed if r < ax)
    return sub, new_axis


def _apply_1q(t, axis_of, controls, target, matrix):
    sub, axes = _slice_controls(t, axis_of, controls)
    v = np.moveaxis(sub, axes[target], 0)
    a0 = v[0].copy()
    a1 = v[1].copy()
    v[0] = matrix[0][0] * a0 + matrix[0][1] * a1
    v[1] = matrix[1][0] * a0 + matrix[1][1] * a1


def _ry(angle: float):
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return ((c, -s), (s, c))


_H = ((1 / np.sqrt(2), 1 / np.sqrt(2)), (1 / np.sqrt(2), -1 / np.sqrt(2)))


def _run(t: np.ndarray, axis_of: Mapping[int, int], gates: Iterable) -> None:
    for g in gates:
        if isinstance(g, Hadamard):
            _apply_1q(t, axis_of, (), g.target, _H)
        elif isinstance(g, RotationY):
            _apply_1q(t, axis_of, (), g.target, _ry(g.angle))
        elif isinstance(g, ControlledRotationY):
            _apply_1q(t, axis_of, g.controls, g.target, _ry(g.angle))
        elif isinstance(g, (PauliX, ControlledNot, MultiControlledX)):
            if isinstance(g, PauliX):
                controls = ()
            elif isinstance(g, ControlledNot):
                controls = ((g.control, ON_ONE),)
            else:
                controls = g.controls
            sub, axes = _slice_controls(t, axis_of, controls)
            v = np.moveaxis(sub, axes[g.target], 0)
            a0 = v[0].copy()
            v[0] = v[1]
            v[1] = a0
        elif isinstance(g, PhaseShift):
            sub, axes = _slice_controls(t, axis_of, g.controls)
            v = np.moveaxis(sub, axes[g.target], 0)
            v[1] *= np.exp(1j * g.angle)
        elif isinstance(g, GlobalPhase):
            t *= np.exp(1j * g.angle)
        elif isinstance(g, QFT):
            _apply_qft(t, axis_of, g)
        elif isinstance(g, ControlledUnitary):
            sub, axes = _slice_controls(t, axis_of, ((g.control, g.polarity),))
            _run(sub, axes, g.circuit.gates)
        else:
            raise ConfigurationError(f"unsupported gate {g!r}")


def _apply_qft(t, axis_of, g: QFT) -> None:
    reg = [axis_of[q] for q in reversed(g.qubits_)]  # most significant first
    others = [ax for ax in range(t.ndim) if ax not in reg]
    view = np.transpose(t, others + reg)
    flat = view.reshape(-1, 2 ** len(reg))
    if g.inverse_:
        out = np.fft.fft(flat, axis=1, norm="ortho")
    else:
        out = np.fft.ifft(flat, axis=1, norm="ortho")
    view[...] = out.reshape(view.shape)


def apply(state: QuantumState, circuit: Circuit) -> QuantumState:
    """Return ``circuit`` applied to ``state``; the input is left untouched."""
    if state.layout != circuit.layout:
        raise ConfigurationError("circuit layout does not match state layout")
    n = state.num_qubits
    t = state.amplitudes.copy().reshape((2,) * n) if n else state.amplitudes.copy()
    _run(t, {q: n - 1 - q for q in range(n)}, circuit.gates)
    return QuantumState(t.reshape(-1), state.layout)


def run_circuit(circuit: Circuit) -> QuantumState:
    """Apply ``circuit`` to the all-zeros state of its layout."""
    return apply(zero_state(circuit.layout), circuit)


def marginal(state: QuantumState, qubits: Sequence[int]) -> np.ndarray:
    """Probabilities over the sub-register ``qubits`` (``qubits[j]`` is bit ``j``)."""
    n = state.num_qubits
    for q in qubits:
        if not 0 <= q < n:
            raise ConfigurationError(f"qubit {q} outside a {n}-qubit layout")
    probs = np.abs(state.amplitudes) ** 2
    t = probs.reshape((2,) * n)
    keep = [n - 1 - q for q in reversed(qubits)]
    drop = tuple(ax for ax in range(n) if ax not in keep)
    reduced = t.sum(axis=drop) if drop else t
    # remaining axes are in increasing axis order; reorder to most significant first
    order = sorted(keep)
    perm = [order.index(ax) for ax in keep]
    reduced = np.transpose(reduced, perm) if len(perm) > 1 else reduced
    return np.asarray(reduced).reshape(-1)


def probability_of(state: QuantumState, qubit: int, outcome: int) -> float:
    n = state.num_qubits
    if not 0 <= qubit < n:
        raise ConfigurationError(f"qubit {qubit} outside a {n}-qubit layout")
    probs = (np.abs(state.amplitudes) ** 2).reshape(2 ** (n - 1 - qubit), 2, 2**qubit)
    return float(probs[:, outcome, :].sum())


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def sample_counts(probs: np.ndarray, width: int, shots: int, seed) -> dict[str, int]:
    if shots < 1:
        raise ConfigurationError("shots must be at least 1")
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p / p.sum()
    counts = make_rng(seed).multinomial(shots, p)
    return {format(i, f"0{width}b"): int(c) for i, c in enumerate(counts) if c}


def sample(state: QuantumState, qubits: Sequence[int], shots: int, seed) -> dict[str, int]:
    """Draw ``shots`` measurements of ``qubits``.

    Bitstrings list ``qubits[-1]`` first, so ``int(key, 2)`` recovers the
    register value with ``qubits[0]`` as least significant bit.
    """
    return sample_counts(marginal(state, qubits), len(qubits), shots, seed)


# --------------------------------------------------------------------------
# Fourier fragments
# --------------------------------------------------------------------------


def _swap(a: int, b: int) -> list:
    return [ControlledNot(a, b), ControlledNot(b, a), ControlledNot(a, b)]


def qft(register_size: int) -> Circuit:
    """Gate-level forward QFT on an ``estimation-ancilla`` register."""
    if register_size < 1:
        raise ConfigurationError("register_size must be at least 1")
    layout = RegisterLayout.build(("estimation-ancilla", register_size))
    circ = Circuit(layout)
    for j in reversed(range(register_size)):
        circ.append(Hadamard(j))
        for k in reversed(range(j)):
            circ.append(PhaseShift(j, np.pi / 2 ** (j - k), ((k, ON_ONE),)))
    for i in range(register_size // 2):
        circ.extend(_swap(i, register_size - 1 - i))
    return circ


def inverse_qft(register_size: int) -> Circuit:
    """Gate-level inverse QFT; a single Hadamard for one qubit."""
    return qft(register_size).inverse()
