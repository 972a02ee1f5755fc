"""Quasilinear Maxwell solver with impedance boundary conditions."""
