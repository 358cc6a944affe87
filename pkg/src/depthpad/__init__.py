"""Temporal-depth numerics for face presentation attack detection.

Modules:
  geometry    - two-camera attack scene models and relative-depth estimation
  depthlabel  - ground-truth depth grids and face masks
  features    - spatial/temporal gradients and the five-branch motion block
  recurrent   - convolutional GRU forward recurrence and depth fusion
  supervision - depth and binary losses with analytic gradients
  metrics     - PAD error rates and the living score
  cli         - simulate / demo / metrics command line front end
"""

__version__ = "0.1.0"
