from __future__ import annotations

import numpy as np
import pytest

from qsv import gates as G
from qsv.circuit import Circuit, random_circuit
from qsv.errors import OracleScaleError
from qsv.oracle import circuit_unitary, dense_oracle
from qsv.statevector import StateVector


class TestDenseOracle:
    def test_empty_circuit_returns_input(self, rng):
        psi = StateVector.random(3, rng)
        assert np.array_equal(dense_oracle(Circuit(3), psi).amps, psi.amps)

    def test_hadamard(self):
        out = dense_oracle(Circuit(1, [G.h(0)]))
        np.testing.assert_allclose(out.amps, [2 ** -0.5] * 2)

    def test_scale_guard(self):
        with pytest.raises(OracleScaleError):
            dense_oracle(Circuit(13))

    def test_unitary_is_unitary(self, rng):
        u = circuit_unitary(random_circuit(4, 30, rng))
        np.testing.assert_allclose(u.conj().T @ u, np.eye(16), atol=1e-12)

    def test_input_not_mutated(self, rng):
        psi = StateVector.random(3, rng)
        before = psi.amps.copy()
        dense_oracle(random_circuit(3, 10, rng), psi)
        assert np.array_equal(psi.amps, before)
