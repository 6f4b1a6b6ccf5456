"""Physical constants used throughout the package (SI units)."""

# Boltzmann constant, CODATA exact value [J/K]
K_B = 1.380649e-23
