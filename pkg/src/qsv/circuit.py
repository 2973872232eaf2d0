"""Circuit container and the benchmark circuit generators (QFT, QAOA, HEA)."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import gates as G
from .errors import ParameterError
from .gates import Gate

TWO_PI = 2 * math.pi


@dataclass(eq=False)
class Circuit:
    """Qubit count plus program-ordered gates.  ``source`` is provenance only."""

    n: int
    gates: list[Gate] = field(default_factory=list)
    source: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"circuit needs at least one qubit, got n={self.n}")
        self.gates = list(self.gates)
        for g in self.gates:
            self._validate(g)

    def _validate(self, gate: Gate) -> None:
        for q in gate.qubits:
            if q >= self.n:
                raise ParameterError(f"{gate!r} touches qubit {q} >= n={self.n}")

    def append(self, gate: Gate) -> "Circuit":
        self._validate(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.n == other.n and self.gates == other.gates

    __hash__ = None

    def count(self, include_barriers: bool = False) -> int:
        return sum(1 for g in self.gates if include_barriers or not g.is_barrier)

    def digest(self) -> str:
        """Stable content hash, used in the distributed plan handshake."""
        h = hashlib.sha256(str(self.n).encode())
        for g in self.gates:
            h.update(f"{g.name}|{g.targets}|{g.controls}|{g.params}".encode())
            if g.matrix is not None:
                h.update(g.matrix.tobytes())
        return h.hexdigest()

    def __repr__(self):
        return f"Circuit(n={self.n}, gates={len(self.gates)}, source={self.source!r})"


def swap_gates(a: int, b: int) -> list[Gate]:
    return [G.cx(a, b), G.cx(b, a), G.cx(a, b)]


def gen_qft(n: int) -> Circuit:
    """Textbook QFT: H and controlled phases from the top qubit down, then swaps."""
    if n < 1:
        raise ParameterError("QFT needs n >= 1")
    c = Circuit(n, source=f"qft:{n}")
    for j in range(n - 1, -1, -1):
        c.append(G.h(j))
        for k in range(j - 1, -1, -1):
            c.append(G.cp(math.pi / (1 << (j - k)), k, j))
    for i in range(n // 2):
        c.extend(swap_gates(i, n - 1 - i))
    return c


def ring_edges(n: int) -> list[tuple[int, int]]:
    """Edges (i, i+1 mod n) of the cycle graph, duplicates and self-loops dropped."""
    seen, out = set(), []
    for i in range(n):
        j = (i + 1) % n
        key = frozenset((i, j))
        if i != j and key not in seen:
            seen.add(key)
            out.append((i, j))
    return out


def gen_qaoa(n: int, layers: int, seed: int) -> Circuit:
    """MaxCut-style QAOA on the ring graph with seeded angles in [0, 2pi)."""
    if n < 2 or layers < 1:
        raise ParameterError("QAOA needs n >= 2 and layers >= 1")
    rng = np.random.default_rng(seed)
    c = Circuit(n, source=f"qaoa:{n}:{layers}:{seed} graph=ring")
    c.extend(G.h(q) for q in range(n))
    edges = ring_edges(n)
    for _ in range(layers):
        gamma, beta = rng.uniform(0, TWO_PI, 2)
        for i, j in edges:
            c.extend([G.cx(i, j), G.rz(gamma, j), G.cx(i, j)])
        c.extend(G.rx(beta, q) for q in range(n))
    return c


def gen_hea(n: int, layers: int = 5, seed: int = 0) -> Circuit:
    """Hardware-efficient ansatz: RX, RY, RZ layers then staggered CNOT ladder.

    Odd layers (1-based) entangle pairs (0,1),(2,3),...; even layers (1,2),(3,4),...
    """
    if n < 2 or layers < 1:
        raise ParameterError("HEA needs n >= 2 and layers >= 1")
    rng = np.random.default_rng(seed)
    c = Circuit(n, source=f"hea:{n}:{layers}:{seed}")
    for layer in range(1, layers + 1):
        for rot in (G.rx, G.ry, G.rz):
            c.extend(rot(theta, q) for q, theta in enumerate(rng.uniform(0, TWO_PI, n)))
        start = 0 if layer % 2 else 1
        c.extend(G.cx(i, i + 1) for i in range(start, n - 1, 2))
    return c


RANDOM_MNEMONICS = tuple(G.GATE_KINDS) + ("swap",)


def random_circuit(n: int, n_gates: int, rng: np.random.Generator,
                   mnemonics: Iterable[str] = RANDOM_MNEMONICS) -> Circuit:
    """Uniformly random gates over ``mnemonics``; a swap counts as one draw."""
    names = [m for m in mnemonics if n >= (2 if m == "swap" else G.GATE_KINDS[m].n_qubits)]
    c = Circuit(n, source=f"random:{n}:{n_gates}")
    for _ in range(n_gates):
        name = names[rng.integers(len(names))]
        if name == "swap":
            a, b = rng.choice(n, 2, replace=False)
            c.extend(swap_gates(int(a), int(b)))
            continue
        kind = G.GATE_KINDS[name]
        qubits = [int(q) for q in rng.choice(n, kind.n_qubits, replace=False)]
        params = list(rng.uniform(0, TWO_PI, kind.n_params))
        c.append(G.make_gate(name, qubits, params))
    return c


def parse_generator(spec: str) -> Circuit:
    """Build a circuit from ``qft:n``, ``qaoa:n:p:seed`` or ``hea:n:layers:seed``."""
    parts = spec.split(":")
    try:
        args = [int(a) for a in parts[1:]]
    except ValueError:
        raise ParameterError(f"bad generator spec {spec!r}") from None
    family = parts[0]
    if family == "qft" and len(args) == 1:
        return gen_qft(*args)
    if family == "qaoa" and len(args) == 3:
        return gen_qaoa(*args)
    if family == "hea" and len(args) in (2, 3):
        return gen_hea(*args)
    raise ParameterError(f"bad generator spec {spec!r}; expected qft:n, qaoa:n:p:seed or hea:n:layers:seed")
