"""OpenQASM 2.0 subset reader and writer.

Supported: the ``OPENQASM 2.0;`` header, ``include "qelib1.inc";``, a single
``qreg``, the gates in :data:`qsv.gates.GATE_KINDS` plus ``swap`` (lowered to
three CX) and ``barrier`` (kept as a fusion fence).  Anything else is rejected
with a :class:`~qsv.errors.QasmError` carrying line and column.

Fused gates are written between ``// @qsv fused ...`` and ``// @qsv end``
comment pragmas that carry the exact matrix; the statements in between are the
gate's constituents, so other tools still see an equivalent program.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import gates as G
from .circuit import Circuit, swap_gates
from .errors import ParameterError, QasmError
from .gates import Gate

SUPPORTED = frozenset(G.GATE_KINDS) | {"swap", "barrier"}
REJECTED = {
    "measure": "measurement is not supported (full-amplitude output only)",
    "reset": "reset is not supported",
    "creg": "classical registers are not supported",
    "if": "classical control flow is not supported",
    "gate": "custom gate definitions are not supported",
    "opaque": "opaque gate declarations are not supported",
}
FUNCTIONS = {"sin": math.sin, "cos": math.cos, "tan": math.tan,
             "exp": math.exp, "ln": math.log, "sqrt": math.sqrt}
MAX_NESTING = 64
MAX_QREG = 64

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<pragma>//[ \t]*@qsv\b[^\n]*)
  | (?P<comment>//[^\n]*)
  | (?P<real>(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<arrow>->)
  | (?P<sym>[;,()\[\]+\-*/^])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


@dataclass
class GateSpec:
    """One parsed gate statement before lowering to :class:`Gate`."""

    mnemonic: str
    params: list[float]
    operands: list[tuple[str, int | None]]
    line: int = 0
    col: int = 0


@dataclass
class _FusedBlock:
    targets: tuple[int, ...]
    controls: tuple[int, ...]
    matrix: np.ndarray
    line: int
    col: int
    body: list = field(default_factory=list)


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QasmError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.reg: str | None = None
        self.size = 0

    # -- token helpers ------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> QasmError:
        tok = tok or self.tok
        return QasmError(msg, tok.line, tok.col)

    def take(self, kind: str, text: str | None = None) -> Token:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            want = repr(text) if text else kind
            got = repr(tok.text) if tok.text else "end of input"
            raise self.error(f"expected {want}, got {got}")
        self.i += 1
        return tok

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        tok = self.tok
        if tok.kind == kind and (text is None or tok.text == text):
            self.i += 1
            return tok
        return None

    # -- grammar ------------------------------------------------------------
    def program(self) -> list:
        head = self.take("id", "OPENQASM")
        ver = self.tok
        if ver.kind not in ("real", "int") or float(ver.text) != 2.0:
            raise self.error("only OPENQASM 2.0 is supported", ver)
        self.i += 1
        self.take("sym", ";")
        items: list = []
        stack: list[_FusedBlock] = []
        while self.tok.kind != "eof":
            if self.tok.kind == "pragma":
                self.pragma(items, stack)
                continue
            item = self.statement()
            if item is not None:
                (stack[-1].body if stack else items).append(item)
        if stack:
            raise self.error("unterminated '@qsv fused' block", Token("", "", stack[-1].line, stack[-1].col))
        if self.reg is None:
            raise self.error("missing qreg declaration", head)
        return items

    def pragma(self, items: list, stack: list) -> None:
        tok = self.take("pragma")
        body = tok.text.split("@qsv", 1)[1].split()
        if body[:1] == ["end"]:
            if not stack:
                raise self.error("'@qsv end' without matching '@qsv fused'", tok)
            block = stack.pop()
            (stack[-1].body if stack else items).append(block)
            return
        if body[:1] != ["fused"] or stack:
            raise self.error("malformed or nested '@qsv' pragma", tok)
        if self.reg is None:
            raise self.error("gate before qreg declaration", tok)
        fields = dict(kv.split("=", 1) for kv in body[1:] if "=" in kv)
        try:
            targets = tuple(int(v) for v in fields["targets"].split(",") if v)
            controls = tuple(int(v) for v in fields.get("controls", "").split(",") if v)
            vals = [float(v) for v in fields["matrix"].split(",")]
        except (KeyError, ValueError):
            raise self.error("fused pragma needs targets=..., matrix=...", tok) from None
        dim = 1 << len(targets)
        if not targets or len(vals) != 2 * dim * dim:
            raise self.error(f"fused pragma matrix needs {2 * dim * dim} values", tok)
        for q in targets + controls:
            if q >= self.size:
                raise self.error(f"qubit index {q} out of range for qreg of size {self.size}", tok)
        with np.errstate(all="ignore"):
            m = (np.array(vals[0::2]) + 1j * np.array(vals[1::2])).reshape(dim, dim)
        stack.append(_FusedBlock(targets, controls, m, tok.line, tok.col))

    def statement(self):
        tok = self.tok
        if tok.kind != "id":
            raise self.error(f"expected a statement, got {tok.text!r}" if tok.text else "expected a statement")
        word = tok.text
        if word in REJECTED:
            raise self.error(REJECTED[word])
        if word == "OPENQASM":
            raise self.error("duplicate OPENQASM header")
        if word == "include":
            self.i += 1
            path = self.take("string")
            if path.text != '"qelib1.inc"':
                raise self.error(f"only qelib1.inc may be included, got {path.text}", path)
            self.take("sym", ";")
            return None
        if word == "qreg":
            self.i += 1
            if self.reg is not None:
                raise self.error("only one qreg declaration is supported", tok)
            name = self.take("id").text
            self.take("sym", "[")
            size_tok = self.take("int")
            self.take("sym", "]")
            self.take("sym", ";")
            if not 1 <= int(size_tok.text) <= MAX_QREG:
                raise self.error(f"qreg size must be between 1 and {MAX_QREG}", size_tok)
            self.reg, self.size = name, int(size_tok.text)
            return None
        return self.gate_statement()

    def gate_statement(self) -> GateSpec:
        tok = self.take("id")
        name = tok.text
        if name not in SUPPORTED:
            raise self.error(f"unknown gate {name!r}", tok)
        if self.reg is None:
            raise self.error("gate before qreg declaration", tok)
        params: list[float] = []
        if self.accept("sym", "("):
            if not self.accept("sym", ")"):
                params.append(self.expr(0))
                while self.accept("sym", ","):
                    params.append(self.expr(0))
                self.take("sym", ")")
        operands = [self.operand()]
        while self.accept("sym", ","):
            operands.append(self.operand())
        self.take("sym", ";")
        return GateSpec(name, params, operands, tok.line, tok.col)

    def operand(self) -> tuple[str, int | None]:
        tok = self.take("id")
        if tok.text != self.reg:
            raise self.error(f"unknown register {tok.text!r}", tok)
        if not self.accept("sym", "["):
            return tok.text, None
        idx = self.take("int")
        self.take("sym", "]")
        if int(idx.text) >= self.size:
            raise self.error(f"qubit index {idx.text} out of range for qreg of size {self.size}", idx)
        return tok.text, int(idx.text)

    # expression grammar: sum > product > unary minus > power > primary
    def expr(self, depth: int) -> float:
        if depth > MAX_NESTING:
            raise self.error("expression nested too deeply")
        val = self.term(depth)
        while self.tok.kind == "sym" and self.tok.text in "+-":
            op = self.take("sym").text
            rhs = self.term(depth)
            val = val + rhs if op == "+" else val - rhs
        return val

    def term(self, depth: int) -> float:
        val = self.unary(depth)
        while self.tok.kind == "sym" and self.tok.text in "*/":
            op = self.take("sym")
            rhs = self.unary(depth)
            if op.text == "/" and rhs == 0:
                raise self.error("division by zero", op)
            val = val * rhs if op.text == "*" else val / rhs
        return val

    def unary(self, depth: int) -> float:
        if depth > MAX_NESTING:
            raise self.error("expression nested too deeply")
        if self.accept("sym", "-"):
            return -self.unary(depth + 1)
        if self.accept("sym", "+"):
            return self.unary(depth + 1)
        return self.power(depth)

    def power(self, depth: int) -> float:
        base = self.primary(depth)
        if self.tok.kind == "sym" and self.tok.text == "^":
            op = self.take("sym")
            exp = self.unary(depth + 1)
            try:
                return _finite(base ** exp, op)
            except (OverflowError, ZeroDivisionError):
                raise self.error("invalid power", op) from None
        return base

    def primary(self, depth: int) -> float:
        tok = self.tok
        if tok.kind in ("real", "int"):
            self.i += 1
            return _finite(float(tok.text), tok)
        if tok.kind == "id" and tok.text == "pi":
            self.i += 1
            return math.pi
        if tok.kind == "id" and tok.text in FUNCTIONS:
            self.i += 1
            self.take("sym", "(")
            arg = self.expr(depth + 1)
            self.take("sym", ")")
            try:
                return _finite(FUNCTIONS[tok.text](arg), tok)
            except (ValueError, OverflowError):
                raise self.error(f"{tok.text}({arg}) is undefined", tok) from None
        if self.accept("sym", "("):
            val = self.expr(depth + 1)
            self.take("sym", ")")
            return val
        raise self.error(f"expected a number, got {tok.text!r}" if tok.text else "expected a number")


def _finite(v, tok: Token):
    if isinstance(v, complex) or not math.isfinite(v):
        raise QasmError("non-finite or complex parameter value", tok.line, tok.col)
    return float(v)


def _lower(spec: GateSpec, n: int) -> list[Gate]:
    """Turn one statement into gates, broadcasting whole-register operands."""
    err = lambda msg: QasmError(msg, spec.line, spec.col)  # noqa: E731
    if spec.mnemonic == "barrier":
        if spec.params:
            raise err("barrier takes no parameters")
        qubits: list[int] = []
        for _, idx in spec.operands:
            qubits.extend(range(n) if idx is None else [idx])
        if len(set(qubits)) != len(qubits):
            raise err("duplicate qubit in barrier")
        return [G.barrier(*qubits)]
    n_qubits = 2 if spec.mnemonic == "swap" else G.GATE_KINDS[spec.mnemonic].n_qubits
    n_params = 0 if spec.mnemonic == "swap" else G.GATE_KINDS[spec.mnemonic].n_params
    if len(spec.params) != n_params:
        raise err(f"{spec.mnemonic} takes {n_params} parameter(s), got {len(spec.params)}")
    if len(spec.operands) != n_qubits:
        raise err(f"{spec.mnemonic} takes {n_qubits} qubit operand(s), got {len(spec.operands)}")
    if any(idx is None for _, idx in spec.operands):
        if n_qubits != 1:
            raise err(f"register broadcast is only supported for single-qubit gates")
        return [G.make_gate(spec.mnemonic, [q], spec.params) for q in range(n)]
    qubits = [idx for _, idx in spec.operands]
    if len(set(qubits)) != len(qubits):
        raise err(f"{spec.mnemonic} needs distinct qubits, got {qubits}")
    if spec.mnemonic == "swap":
        return swap_gates(*qubits)
    return [G.make_gate(spec.mnemonic, qubits, spec.params)]


def _lower_all(items: list, n: int) -> list[Gate]:
    out: list[Gate] = []
    for item in items:
        if isinstance(item, GateSpec):
            out.extend(_lower(item, n))
            continue
        parts = _lower_all(item.body, n)
        try:
            out.append(G.fused(item.matrix, item.targets, item.controls, parts=parts))
        except ParameterError as e:
            raise QasmError(f"invalid fused gate: {e}", item.line, item.col) from None
    return out


def parse_statements(text: str) -> tuple[int, list]:
    """Parse into ``(qubit count, [GateSpec | fused block])`` without lowering."""
    p = _Parser(tokenize(text))
    items = p.program()
    return p.size, items


def parse_qasm(text: str | bytes, source: str = "<qasm>") -> Circuit:
    """Parse an OpenQASM 2.0 subset program into a :class:`Circuit`."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            head = bytes(text[:e.start])
            line = head.count(b"\n") + 1
            col = e.start - (head.rfind(b"\n") + 1) + 1
            raise QasmError("input is not valid UTF-8", line, col) from None
    if text.startswith("﻿"):
        text = text[1:]
    n, items = parse_statements(text)
    return Circuit(n, _lower_all(items, n), source=source)


def load_qasm(path) -> Circuit:
    with open(path, "rb") as f:
        return parse_qasm(f.read(), source=str(path))


def _fmt_matrix(m: np.ndarray) -> str:
    return ",".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in m.ravel())


def _emit_gate(g: Gate, reg: str, export_fused: bool, lines: list[str]) -> None:
    ops = lambda qs: ",".join(f"{reg}[{q}]" for q in qs)  # noqa: E731
    if g.is_barrier:
        lines.append(f"barrier {ops(g.targets)};")
        return
    if g.name in G.GATE_KINDS:
        kind = G.GATE_KINDS[g.name]
        par = "(" + ",".join(repr(float(p)) for p in g.params) + ")" if g.params else ""
        qubits = (g.controls + g.targets) if kind.controlled else g.targets
        lines.append(f"{g.name}{par} {ops(qubits)};")
        return
    if not export_fused:
        raise ParameterError(f"{g!r} has no OpenQASM 2.0 form; enable export_fused")
    ctl = ",".join(map(str, g.controls))
    lines.append(f"// @qsv fused targets={','.join(map(str, g.targets))} controls={ctl} "
                 f"matrix={_fmt_matrix(g.matrix)}")
    for part in g.parts:
        _emit_gate(part, reg, export_fused, lines)
    lines.append("// @qsv end")


def emit_qasm(circuit: Circuit, export_fused: bool = False, reg: str = "q") -> str:
    """Write ``circuit`` as OpenQASM 2.0; fused gates need ``export_fused=True``."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg {reg}[{circuit.n}];"]
    for g in circuit.gates:
        _emit_gate(g, reg, export_fused, lines)
    return "\n".join(lines) + "\n"
