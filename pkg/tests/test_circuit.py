from __future__ import annotations

import numpy as np
import pytest

from qsv import gates as G
from qsv.circuit import Circuit, gen_hea, gen_qaoa, gen_qft, parse_generator
from qsv.errors import ParameterError
from qsv.statevector import StateVector, run_local

TWO_PI = 2 * np.pi


class TestGate:
    def test_non_unitary_rejected(self):
        with pytest.raises(ParameterError):
            G.unitary(np.array([[1, 1], [0, 1]]), [0])

    def test_nan_rejected(self):
        with pytest.raises(ParameterError):
            G.unitary(np.array([[np.nan, 0], [0, 1]]), [0])

    def test_overlap_rejected(self):
        with pytest.raises(ParameterError):
            G.unitary(np.eye(2), [0], [0])

    def test_matrix_read_only(self):
        with pytest.raises(ValueError):
            G.h(0).matrix[0, 0] = 2

    def test_cp_is_diag_phase(self):
        np.testing.assert_allclose(G.cp(0.3, 0, 1).matrix, np.diag([1, np.exp(0.3j)]))


class TestCircuit:
    def test_qubit_range_checked(self):
        with pytest.raises(ParameterError):
            Circuit(2, [G.h(2)])

    def test_zero_qubits_rejected(self):
        with pytest.raises(ParameterError):
            Circuit(0)

    def test_digest_tracks_content(self):
        a = Circuit(2, [G.h(0)])
        assert a.digest() == Circuit(2, [G.h(0)]).digest()
        assert a.digest() != Circuit(2, [G.h(1)]).digest()


class TestQft:
    def test_one_qubit(self):
        assert [g.name for g in gen_qft(1)] == ["h"]

    def test_four_qubit_count(self):
        c = gen_qft(4)
        assert sum(g.name in ("h", "cp") for g in c) == 10
        assert sum(g.name == "cx" for g in c) == 2 * 3

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_count_formula(self, n):
        assert len(gen_qft(n)) == n * (n + 1) // 2 + 3 * (n // 2)


class TestQaoa:
    def test_two_qubit_trace(self):
        names = [g.name for g in gen_qaoa(2, 1, 5)]
        assert names == ["h", "h", "cx", "rz", "cx", "rx", "rx"]

    def test_layer_structure(self):
        c = gen_qaoa(5, 2, 3)
        assert len(c) == 5 + 2 * (5 * 3 + 5)
        assert [g.qubits for g in c.gates[5:8]] == [(1, 0), (1,), (1, 0)]

    def test_determinism(self):
        assert gen_qaoa(6, 2, 9) == gen_qaoa(6, 2, 9)
        assert gen_qaoa(6, 2, 9) != gen_qaoa(6, 2, 10)

    def test_angles_in_range(self):
        params = [p for g in gen_qaoa(10, 3, 1) for p in g.params]
        assert all(0 <= p < TWO_PI for p in params)

    def test_norm_preserved(self):
        assert abs(run_local(gen_qaoa(10, 3, 2), StateVector(10)).norm2() - 1) < 1e-12


class TestHea:
    def test_one_layer_counts(self):
        c = gen_hea(4, 1, 0)
        assert sum(g.name in ("rx", "ry", "rz") for g in c) == 12
        assert sum(g.name == "cx" for g in c) == 2

    def test_staggered_pairs(self):
        pairs = [(g.controls[0], g.targets[0]) for g in gen_hea(5, 2, 0) if g.name == "cx"]
        assert pairs == [(0, 1), (2, 3), (1, 2), (3, 4)]

    def test_paper_scale_gate_count(self):
        assert 100 <= len(gen_hea(20, 5, 7)) <= 1652

    def test_determinism(self):
        assert gen_hea(8, 3, 4) == gen_hea(8, 3, 4)


class TestGeneratorSpec:
    def test_specs(self):
        assert parse_generator("qft:5") == gen_qft(5)
        assert parse_generator("hea:6:2:1") == gen_hea(6, 2, 1)

    @pytest.mark.parametrize("spec", ["qft", "qft:x", "bogus:3", "qaoa:4:1"])
    def test_bad_specs(self, spec):
        with pytest.raises(ParameterError):
            parse_generator(spec)
