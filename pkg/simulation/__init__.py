"""
Simulation Package.

Numerical core of the two-fold mechanical squeezing simulator.
Modules:
- params.py: Physical parameters, SI conversion, cooperativities and thresholds
- meanfield.py: First-moment integration, periodic orbit, Fourier recursion, effective couplings
- floquet.py: Time-periodic covariance propagation (lab frame and rotating frame with CRT)
- rwa.py: Constant rotating-frame theory (Lyapunov steady state, closed forms, optimal gain)
- bogoliubov.py: Bogoliubov-mode route with adiabatic cavity elimination
- spectrum.py: Transfer functions, noise spectra and integrated variances
- routes.py: Method fan-out and cross-route residuals
- sweep.py: Parallel parameter grids
"""
