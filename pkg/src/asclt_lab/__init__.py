"""Almost-sure central limit theorems for dynamical systems: simulation and checks."""
