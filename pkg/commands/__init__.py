"""
Command-line commands of the squeezing simulator.

One click command per study:
- meanfield: Periodic mean-field orbit and effective couplings
- floquet: Periodic covariance steady state (lab or rotating frame)
- rwa: Rotating-frame steady state by any route, with cross-route comparison
- sweep: Parameter grids
"""
