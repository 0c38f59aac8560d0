"""Quantum-jump trajectories of a driven damped Duffing oscillator.

The package simulates the photon-counting (quantum jumps) unravelling of
the master equation for a driven, damped nonlinear oscillator, records
detection events, and analyses power spectra of both the position
expectation and the photon-count increments to classify the dynamical
regime (periodic, chaotic-like, period-doubled detection, quasi-periodic).
"""

__version__ = "0.1.0"

from .fock import (
    PhysicalParams,
    StateVector,
    BandedOperator,
    HamiltonianParts,
    build_ladder,
    build_quadratures,
    build_hamiltonian,
    build_lindblad,
    coherent_state,
    fock_state,
    expectation,
)
from .errors import (
    QjumpsError,
    LeakageError,
    IntegrationError,
    DarkStateError,
    DivergenceError,
)
