"""noisespin: stochastic-Hamiltonian trajectory simulation of open spin systems.

A small laboratory for the correspondence between classically fluctuating
couplings and quantum dissipation. Pure-state trajectories of a central
system coupled to auxiliary sites through Ornstein-Uhlenbeck noise are
ensemble-averaged and compared against exact Lindblad reference dynamics.

Subpackages / modules:
    numkernel   dense complex linear algebra primitives
    noisegen    OU (Johnson) noise paths, correlation and spectrum estimators
    models      Hamiltonian builders, initial states, rate mappings
    lindblad    master-equation reference integrator and closed forms
    trajectory  trajectory propagation and ensemble statistics
    harness     presets, config, comparison metrics, CSV/JSON export
    cli         `simulate` command line entry point
"""

__version__ = "0.1.0"

__all__ = [
    "numkernel",
    "noisegen",
    "models",
    "lindblad",
    "trajectory",
    "harness",
]
