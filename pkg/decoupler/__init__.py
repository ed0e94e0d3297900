"""Dynamical decoupling of a qubit in an Ornstein-Uhlenbeck bath: Monte Carlo
propagation, closed-form decay laws, process tomography and fitting."""

__version__ = '0.1.0'
