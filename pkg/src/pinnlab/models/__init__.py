"""Model problems: Poisson on a slit square, cubic Schrödinger, and Navier-Stokes."""
