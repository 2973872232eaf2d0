from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsv import gates as G
from qsv.circuit import Circuit, gen_qft, random_circuit
from qsv.dagc import contract
from qsv.errors import ParameterError, QasmError
from qsv.qasm import emit_qasm, load_qasm, parse_qasm
from qsv.statevector import StateVector, run_local

from conftest import max_dev

HEAD = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


def located(text, *fragments):
    with pytest.raises(QasmError) as info:
        parse_qasm(text)
    err = info.value
    assert err.line >= 1 and err.col >= 1
    for f in fragments:
        assert f in str(err)
    return err


class TestParse:
    def test_bell_pair(self):
        c = parse_qasm("OPENQASM 2.0; qreg q[2]; h q[0]; cx q[0],q[1];")
        assert c.n == 2 and c == Circuit(2, [G.h(0), G.cx(0, 1)])

    def test_swap_lowered(self):
        c = parse_qasm(HEAD + "qreg q[2]; swap q[0],q[1];")
        assert [(g.name, g.controls + g.targets) for g in c] == [("cx", (0, 1)), ("cx", (1, 0)),
                                                                 ("cx", (0, 1))]

    def test_expressions(self):
        c = parse_qasm(HEAD + "qreg q[1]; rz(-pi/4 + 2*sin(pi/2)^2) q[0]; u1(1e-3) q[0];")
        assert c.gates[0].params[0] == pytest.approx(-np.pi / 4 + 2)
        assert c.gates[1].params[0] == pytest.approx(1e-3)

    def test_register_broadcast(self):
        c = parse_qasm(HEAD + "qreg q[3]; h q;")
        assert [g.targets for g in c] == [(0,), (1,), (2,)]

    def test_barrier_kept_as_fence(self):
        c = parse_qasm(HEAD + "qreg q[2]; h q[0]; barrier q; h q[0];")
        assert c.gates[1].is_barrier and c.count() == 2

    def test_comments_and_bom(self):
        c = parse_qasm(("﻿// hi\n" + HEAD + "qreg q[1]; // tail\nx q[0];").encode())
        assert len(c) == 1

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "bell.qasm"
        p.write_text(HEAD + "qreg q[2]; h q[0]; cx q[0],q[1];")
        assert load_qasm(p).source == str(p)


class TestDiagnostics:
    def test_missing_header(self):
        located("qreg q[1];", "OPENQASM")

    @pytest.mark.parametrize("stmt", ["measure q[0] -> c[0];", "creg c[1];", "reset q[0];",
                                      "gate foo a { x a; }", "if (c==1) x q[0];"])
    def test_rejected_constructs(self, stmt):
        located(HEAD + "qreg q[1];\n" + stmt)

    def test_unknown_include(self):
        located('OPENQASM 2.0;\ninclude "other.inc";', "qelib1.inc")

    def test_unknown_mnemonic_location(self):
        err = located(HEAD + "qreg q[2];\n  foo q[0];", "foo")
        assert (err.line, err.col) == (4, 3)

    def test_wrong_arity(self):
        located(HEAD + "qreg q[2]; cx q[0];")

    def test_wrong_param_count(self):
        located(HEAD + "qreg q[1]; rz q[0];")

    def test_out_of_range(self):
        located(HEAD + "qreg q[2]; h q[2];", "range")

    def test_missing_qreg(self):
        located(HEAD + "h q[0];")

    def test_second_qreg(self):
        located(HEAD + "qreg q[1]; qreg r[1];")

    def test_lexical_error(self):
        located(HEAD + "qreg q[1]; h q[0] $;")

    def test_division_by_zero(self):
        located(HEAD + "qreg q[1]; rz(1/0) q[0];")

    def test_deep_nesting(self):
        located(HEAD + "qreg q[1]; rz(" + "(" * 500 + "1" + ")" * 500 + ") q[0];")
        located(HEAD + "qreg q[1]; rz(" + "-" * 5000 + "1) q[0];")

    def test_bad_utf8(self):
        located(HEAD.encode() + b"qreg q[1]; \xff")

    @given(st.binary(max_size=200))
    @settings(max_examples=300, deadline=None)
    def test_arbitrary_bytes_never_crash(self, data):
        try:
            parse_qasm(data)
        except QasmError as e:
            assert e.line >= 1 and e.col >= 1


class TestEmit:
    def test_single_h(self):
        assert emit_qasm(Circuit(1, [G.h(0)])) == HEAD + "qreg q[1];\nh q[0];\n"

    def test_qft_round_trip(self):
        c = gen_qft(8)
        assert parse_qasm(emit_qasm(c)) == c

    def test_random_round_trips(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 9))
            c = random_circuit(n, int(rng.integers(0, 30)), rng)
            back = parse_qasm(emit_qasm(c))
            assert back == c
            if n <= 8 and len(c):
                a = run_local(c, StateVector(n)).amps
                assert max_dev(a, run_local(back, StateVector(n)).amps) < 1e-12

    def test_fused_needs_export_mode(self, rng):
        fused, _, _ = contract(Circuit(2, [G.h(0), G.h(1)]))
        with pytest.raises(ParameterError):
            emit_qasm(fused)

    def test_fused_matrix_round_trip(self, rng):
        c = Circuit(3, [G.rx(0.4, 0), G.ry(1.1, 2), G.cx(0, 1)])
        fused, _, _ = contract(c)
        two = [g for g in fused if g.k == 2][0]
        back = parse_qasm(emit_qasm(fused, export_fused=True))
        got = [g for g in back if g.k == 2][0]
        assert got.targets == two.targets and np.array_equal(got.matrix, two.matrix)
        ref = run_local(c, StateVector(3)).amps
        assert max_dev(run_local(back, StateVector(3)).amps, ref) < 1e-12

    def test_bad_fused_block_located(self):
        text = HEAD + "qreg q[1];\n// @qsv fused targets=0 matrix=1,0,1,0,0,0,1,0\nh q[0];\n// @qsv end\n"
        located(text, "unitar")
