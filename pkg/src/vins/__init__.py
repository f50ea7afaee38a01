"""Speed-constrained strapdown inertial navigation toolkit.

A small 1-D convolutional network regresses momentary speed from raw IMU
windows; an error-state EKF consumes that speed as a pseudo-measurement
alongside zero-velocity updates and sparse position fixes to produce
drift-constrained 3-D trajectories.
"""

__version__ = "0.1.0"
