# Numerical core: spectral operators, Littlewood-Paley diagnostics, model RHS, time stepping.
