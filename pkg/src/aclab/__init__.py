"""Desk-scale numerical laboratory for diffuse-interface layers.

Modules cover the double-well potential (:mod:`aclab.wells`), the
one-dimensional connecting profile and its corrector
(:mod:`aclab.profile`), Fermi-coordinate geometry
(:mod:`aclab.geometry`), the phase-field solver (:mod:`aclab.field`),
second-variation spectra (:mod:`aclab.spectrum`), the reduced sheet
system (:mod:`aclab.toda`), the Dirichlet-data barrier construction
(:mod:`aclab.barrier`), and the experiment harness with its CLI
(:mod:`aclab.harness`).
"""

__version__ = "0.1.0"
