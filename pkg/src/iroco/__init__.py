"""Smartwatch-style arm pose estimation and teleoperation toolkit.

Subpackages and modules:

- :mod:`iroco.rotations`  rotation/heading representations and arm kinematics
- :mod:`iroco.datamodel`  observation/state records, calibration, datasets
- :mod:`iroco.synthgen`   synthetic motion and sensor simulation
- :mod:`iroco.neural`     small numpy neural nets with reverse-mode gradients
- :mod:`iroco.denkf`      ensemble Kalman filter with learned models
- :mod:`iroco.control`    pose-to-end-effector control mapping
- :mod:`iroco.metrics`    pose error metrics and session reports
- :mod:`iroco.cli`        command line entry points
- :mod:`iroco.teleopd`    live teleoperation web service
"""

__version__ = "0.1.0"
