"""Neural field equations on the Poincaré disk.

Modules
-------
geometry    points, distances and group actions on the disk
specfun     hypergeometric and spherical functions, radial Fourier transform
kernels     radial connectivity kernels
field       discretized field, inputs, firing rates and time stepping
stationary  homogeneous solutions, contraction certificates, Picard iteration
bumps       stationary pulses and their stability
verify      brute-force oracles
cli         command-line front end
"""

__version__ = "0.1.0"
