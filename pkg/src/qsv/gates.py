"""Gate model and the standard gate library.

A gate is a unitary on ``k`` ordered target qubits plus an optional list of
control qubits.  Target position ``p`` in ``Gate.targets`` is bit ``p`` of the
row/column index of ``Gate.matrix`` (first target = least significant bit).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError

MAX_ARITY = 3
DEFAULT_FUSION_CAP = 2
UNITARY_TOL = 1e-10


def check_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> None:
    dim = m.shape[0]
    if m.ndim != 2 or m.shape != (dim, dim) or dim & (dim - 1):
        raise ParameterError(f"gate matrix must be square with power-of-two size, got {m.shape}")
    err = np.abs(m.conj().T @ m - np.eye(dim)).max()
    if not err <= tol:  # also rejects NaN
        raise ParameterError(f"gate matrix is not unitary (max |M^H M - I| = {err:.3e})")


@dataclass(frozen=True, eq=False)
class Gate:
    """A (possibly controlled) unitary acting on ordered target qubits.

    ``matrix`` is None only for the ``barrier`` pseudo-gate, which carries no
    action and fences gate fusion.  ``parts`` holds the constituent gates of a
    fused gate in program order; ``provenance`` their original indices.
    """

    name: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    matrix: np.ndarray | None = field(default=None, repr=False)
    parts: tuple["Gate", ...] = field(default=(), repr=False)
    provenance: tuple[int, ...] = ()

    def __post_init__(self):
        targets = tuple(int(q) for q in self.targets)
        controls = tuple(int(q) for q in self.controls)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "provenance", tuple(int(i) for i in self.provenance))
        qubits = targets + controls
        if any(q < 0 for q in qubits):
            raise ParameterError(f"negative qubit index in {self.name}{qubits}")
        if len(set(qubits)) != len(qubits):
            raise ParameterError(f"duplicate or overlapping qubits in {self.name}: "
                                 f"targets={targets} controls={controls}")
        if self.matrix is None:
            if self.name != "barrier":
                raise ParameterError(f"gate {self.name!r} has no matrix")
            if controls:
                raise ParameterError("barrier cannot carry controls")
            return
        if not targets:
            raise ParameterError(f"gate {self.name!r} has no target qubits")
        if len(targets) > MAX_ARITY:
            raise ParameterError(f"gate arity {len(targets)} exceeds maximum {MAX_ARITY}")
        m = np.array(self.matrix, dtype=np.complex128)
        if m.shape != (1 << len(targets),) * 2:
            raise ParameterError(f"matrix shape {m.shape} does not match {len(targets)} target(s)")
        check_unitary(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def k(self) -> int:
        return len(self.targets)

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + self.controls

    @property
    def is_barrier(self) -> bool:
        return self.matrix is None

    @property
    def label(self) -> str:
        return self.name.upper()

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        if (self.name, self.targets, self.controls, self.params) != (
                other.name, other.targets, other.controls, other.params):
            return False
        if self.matrix is None or other.matrix is None:
            return self.matrix is None and other.matrix is None
        return np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def __repr__(self):
        ctl = f"{list(self.controls)}->" if self.controls else ""
        par = "(" + ", ".join(f"{p:.6g}" for p in self.params) + ")" if self.params else ""
        return f"{self.label}{par}[{ctl}{list(self.targets)}]"


# -- fixed matrices ---------------------------------------------------------

_S2 = 1 / math.sqrt(2)
I2 = np.eye(2, dtype=np.complex128)
H = np.array([[_S2, _S2], [_S2, -_S2]], dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
S = np.array([[1, 0], [0, 1j]], dtype=np.complex128)
SDG = S.conj()
T = np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=np.complex128)
TDG = T.conj()


def rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=np.complex128)


def phase_matrix(lam: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=np.complex128)


@dataclass(frozen=True)
class GateKind:
    """Static description of one supported mnemonic."""

    name: str
    n_params: int
    n_qubits: int
    controlled: bool
    matrix: Callable[..., np.ndarray]


def _fixed(m):
    return lambda: m


GATE_KINDS: dict[str, GateKind] = {k.name: k for k in [
    GateKind("h", 0, 1, False, _fixed(H)),
    GateKind("x", 0, 1, False, _fixed(X)),
    GateKind("y", 0, 1, False, _fixed(Y)),
    GateKind("z", 0, 1, False, _fixed(Z)),
    GateKind("s", 0, 1, False, _fixed(S)),
    GateKind("sdg", 0, 1, False, _fixed(SDG)),
    GateKind("t", 0, 1, False, _fixed(T)),
    GateKind("tdg", 0, 1, False, _fixed(TDG)),
    GateKind("rx", 1, 1, False, rx_matrix),
    GateKind("ry", 1, 1, False, ry_matrix),
    GateKind("rz", 1, 1, False, rz_matrix),
    GateKind("u1", 1, 1, False, phase_matrix),
    GateKind("p", 1, 1, False, phase_matrix),
    GateKind("cx", 0, 2, True, _fixed(X)),
    GateKind("cz", 0, 2, True, _fixed(Z)),
    GateKind("cp", 1, 2, True, phase_matrix),
    GateKind("cu1", 1, 2, True, phase_matrix),
]}


def make_gate(name: str, qubits: Sequence[int], params: Sequence[float] = ()) -> Gate:
    """Build a library gate; for controlled kinds ``qubits`` is (control, target)."""
    kind = GATE_KINDS.get(name)
    if kind is None:
        raise ParameterError(f"unknown gate {name!r}")
    if len(params) != kind.n_params:
        raise ParameterError(f"{name} takes {kind.n_params} parameter(s), got {len(params)}")
    if len(qubits) != kind.n_qubits:
        raise ParameterError(f"{name} acts on {kind.n_qubits} qubit(s), got {len(qubits)}")
    m = kind.matrix(*params)
    if kind.controlled:
        return Gate(name, targets=(qubits[1],), controls=(qubits[0],), params=params, matrix=m)
    return Gate(name, targets=tuple(qubits), params=params, matrix=m)


def h(q): return make_gate("h", [q])
def x(q): return make_gate("x", [q])
def y(q): return make_gate("y", [q])
def z(q): return make_gate("z", [q])
def s(q): return make_gate("s", [q])
def t(q): return make_gate("t", [q])
def rx(theta, q): return make_gate("rx", [q], [theta])
def ry(theta, q): return make_gate("ry", [q], [theta])
def rz(theta, q): return make_gate("rz", [q], [theta])
def p(lam, q): return make_gate("p", [q], [lam])
def cx(c, t): return make_gate("cx", [c, t])
def cz(c, t): return make_gate("cz", [c, t])
def cp(theta, c, t): return make_gate("cp", [c, t], [theta])


def barrier(*qubits: int) -> Gate:
    return Gate("barrier", targets=tuple(qubits))


def unitary(matrix, targets: Sequence[int], controls: Sequence[int] = (), name: str = "unitary") -> Gate:
    return Gate(name, targets=tuple(targets), controls=tuple(controls), matrix=np.asarray(matrix))


def fused(matrix, targets, controls=(), parts=(), provenance=()) -> Gate:
    return Gate("fused", targets=tuple(targets), controls=tuple(controls),
                matrix=np.asarray(matrix), parts=tuple(parts), provenance=tuple(provenance))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z_ = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z_)
    d = np.diagonal(r)
    return q * (d / np.abs(d))
