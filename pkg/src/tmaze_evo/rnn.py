"""Recurrent controller and flat genotype codec.

The genotype is a flat C-order vector [input-to-state | state-to-state |
state-to-output]. State units have no self-connection: the recurrent
diagonal is stored in the genotype but excluded from the dynamics, which
keeps the three blocks rectangular and index arithmetic trivial.
"""

from __future__ import annotations

import numpy as np

from .errors import GenotypeLengthError
from .sensors import NUM_INPUTS

N_HIDDEN = 50
N_OUTPUTS = 2

XR_LEN = NUM_INPUTS * N_HIDDEN
RR_LEN = N_HIDDEN * N_HIDDEN
RY_LEN = N_HIDDEN * N_OUTPUTS
GENOTYPE_LEN = XR_LEN + RR_LEN + RY_LEN  # 7150

LEAK = 0.01
GAIN = 1.0 - LEAK

GENOTYPE_HEADER = f"tmaze-genotype v1 {GENOTYPE_LEN}"


def split_genotype(genotype) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """View the flat vector as (w_xr, w_rr, w_ry) matrices."""
    g = np.asarray(genotype, dtype=np.float64).ravel()
    if g.shape != (GENOTYPE_LEN,):
        raise GenotypeLengthError(
            f"genotype has {g.size} genes, expected {GENOTYPE_LEN}")
    w_xr = g[:XR_LEN].reshape(NUM_INPUTS, N_HIDDEN)
    w_rr = g[XR_LEN:XR_LEN + RR_LEN].reshape(N_HIDDEN, N_HIDDEN)
    w_ry = g[XR_LEN + RR_LEN:].reshape(N_HIDDEN, N_OUTPUTS)
    return w_xr, w_rr, w_ry


class RNNController:
    """Leaky tanh recurrent network mapping sensors to wheel commands."""

    def __init__(self, genotype):
        self.w_xr, self.w_rr, self.w_ry = split_genotype(genotype)
        self.state = np.zeros(N_HIDDEN)

    def reset(self) -> None:
        self.state = np.zeros(N_HIDDEN)

    def step(self, x: np.ndarray) -> tuple[float, float]:
        """Advance the state one tick and return raw wheel commands."""
        w_rr = self.w_rr
        pre = x @ self.w_xr + self.state @ w_rr - self.state * w_rr.diagonal()
        self.state = GAIN * np.tanh(pre) + LEAK * self.state
        y = self.state @ self.w_ry
        return float(y[0]), float(y[1])


def save_genotype(genotype, path: str, comment: str | None = None) -> None:
    g = np.asarray(genotype, dtype=np.float64).ravel()
    if g.shape != (GENOTYPE_LEN,):
        raise GenotypeLengthError(
            f"genotype has {g.size} genes, expected {GENOTYPE_LEN}")
    with open(path, "w") as f:
        f.write(GENOTYPE_HEADER + "\n")
        if comment:
            f.write(f"# {comment}\n")
        f.write("\n".join(repr(float(v)) for v in g) + "\n")


def load_genotype(path: str) -> np.ndarray:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("tmaze-genotype v1 "):
        raise GenotypeLengthError(f"{path}: missing 'tmaze-genotype v1' header")
    try:
        declared = int(lines[0].split()[-1])
    except ValueError:
        raise GenotypeLengthError(f"{path}: bad header {lines[0]!r}") from None
    values = [line for line in lines[1:]
              if line.strip() and not line.startswith("#")]
    if declared != GENOTYPE_LEN or len(values) != GENOTYPE_LEN:
        raise GenotypeLengthError(
            f"{path}: declares {declared} genes, carries {len(values)}, "
            f"expected {GENOTYPE_LEN}")
    return np.array([float(v) for v in values])
