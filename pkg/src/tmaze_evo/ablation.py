"""Per-step lesions: scrambling one information channel while a trial runs.

Sensor lesions shuffle the values inside one input section; weight lesions
shuffle the entries of one weight matrix. A fresh permutation is drawn every
step so the channel carries no stable information but keeps its value
distribution.
"""

from __future__ import annotations

import numpy as np

from .sensors import ACCEL_SLICE, PIXEL_SLICE, PROX_SLICE

SENSOR_TARGETS = {
    "proximity": PROX_SLICE,
    "accelerometer": ACCEL_SLICE,
    "vision": PIXEL_SLICE,
}
WEIGHT_TARGETS = {
    "input_weights": "w_xr",
    "recurrent_weights": "w_rr",
    "output_weights": "w_ry",
}
ABLATIONS = ("none",) + tuple(SENSOR_TARGETS) + tuple(WEIGHT_TARGETS)


class Ablation:
    """One lesion bound to the controller it scrambles."""

    def __init__(self, name: str, controller):
        if name not in ABLATIONS:
            raise ValueError(f"unknown ablation {name!r}, expected one of {ABLATIONS}")
        self.name = name
        self.section = SENSOR_TARGETS.get(name)
        self.attr = WEIGHT_TARGETS.get(name)
        self.controller = controller
        self.pristine = None
        if self.attr is not None:
            if not hasattr(controller, self.attr):
                raise ValueError(
                    f"ablation {name!r} targets controller weights but "
                    f"{type(controller).__name__} has no {self.attr}")
            self.pristine = getattr(controller, self.attr).copy()

    def before_step(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Scramble the lesioned channel in place for this step."""
        if self.section is not None:
            sec = x[self.section]
            x[self.section] = sec[rng.permutation(sec.size)]
        elif self.attr is not None:
            flat = self.pristine.ravel()
            setattr(self.controller, self.attr,
                    flat[rng.permutation(flat.size)].reshape(self.pristine.shape))
        return x

    def restore(self) -> None:
        """Put the controller's original weights back after the trial."""
        if self.attr is not None:
            setattr(self.controller, self.attr, self.pristine.copy())
