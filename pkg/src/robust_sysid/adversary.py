"""Input policies and filtration-adapted adversarial disturbances."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class InputPolicy:
    """Per-step i.i.d. control input distribution.

    kinds: "gaussian_iso" (mean, variance), "uniform_box" (lo, hi),
    "rademacher", "zero".
    """

    kind: str
    mean: float = 0.0
    variance: float = 1.0
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian_iso", "uniform_box", "rademacher", "zero"):
            raise ValueError(f"unknown input policy {self.kind!r}")
        if self.kind == "gaussian_iso" and self.variance <= 0:
            raise ValueError("variance must be positive")
        if self.kind == "uniform_box" and not self.hi > self.lo:
            raise ValueError("need hi > lo")

    @property
    def sigma_u(self) -> float:
        """Sub-Gaussian proxy: std for Gaussian, box half-width, 1 for signs."""
        if self.kind == "gaussian_iso":
            return math.sqrt(self.variance)
        if self.kind == "uniform_box":
            return (self.hi - self.lo) / 2.0
        if self.kind == "rademacher":
            return 1.0
        return 0.0

    def draw(self, rng: np.random.Generator, T: int, m: int) -> np.ndarray:
        """T draws of an m-vector; the batched form is the canonical stream order."""
        if self.kind == "gaussian_iso":
            return self.mean + math.sqrt(self.variance) * rng.standard_normal((T, m))
        if self.kind == "uniform_box":
            return rng.uniform(self.lo, self.hi, (T, m))
        if self.kind == "rademacher":
            return rng.choice(np.array([-1.0, 1.0]), size=(T, m))
        return np.zeros((T, m))

    def to_json_dict(self) -> dict:
        doc = {"kind": self.kind}
        if self.kind == "gaussian_iso":
            doc.update(mean=self.mean, variance=self.variance)
        elif self.kind == "uniform_box":
            doc.update(lo=self.lo, hi=self.hi)
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "InputPolicy":
        return InputPolicy(**doc)


def draw_input(policy: InputPolicy, rng: np.random.Generator, m: int) -> np.ndarray:
    """One input vector (batched draw of size 1)."""
    return policy.draw(rng, 1, m)[0]


@dataclass(frozen=True)
class AttackPolicy:
    """Bernoulli(p) attack schedule plus the disturbance map at attack steps.

    kinds:
      - "signed_mean_gaussian": w_i = sgn(x_i)*gamma with gamma ~
        N(mean_pos, variance) when x_i >= 0 and N(mean_neg, variance)
        otherwise (sgn(0) := +1).
      - "constant_sigma": every coordinate equals value.
      - "none": zero disturbance even when flagged.
    """

    p: float
    kind: str = "none"
    mean_pos: float = 0.0
    mean_neg: float = 0.0
    variance: float = 0.0
    value: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        if self.kind not in ("signed_mean_gaussian", "constant_sigma", "none"):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind == "signed_mean_gaussian" and self.variance < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def sigma_w(self) -> float:
        if self.kind == "signed_mean_gaussian":
            return max(abs(self.mean_pos), abs(self.mean_neg)) + math.sqrt(self.variance)
        if self.kind == "constant_sigma":
            return abs(self.value)
        return 0.0

    def draw_flags(self, rng: np.random.Generator, T: int) -> np.ndarray:
        return rng.random(T) < self.p

    def draw_magnitudes(self, rng: np.random.Generator, flags: np.ndarray, d: int):
        """Per-step disturbance candidates (w_pos, w_neg), each (T, d).

        w_pos[t] applies to coordinates with x_t >= 0, w_neg[t] to the rest;
        rows without an attack flag are zero. Drawing only at flagged steps
        keeps consumption independent of the input stream.
        """
        T = flags.shape[0]
        w_pos = np.zeros((T, d))
        w_neg = np.zeros((T, d))
        idx = np.flatnonzero(flags)
        if idx.size == 0 or self.kind == "none":
            return w_pos, w_neg
        if self.kind == "signed_mean_gaussian":
            std = math.sqrt(self.variance)
            for t in idx:
                w_pos[t] = self.mean_pos + std * rng.standard_normal(d)
                w_neg[t] = -(self.mean_neg + std * rng.standard_normal(d))
        else:  # constant_sigma
            w_pos[idx] = self.value
            w_neg[idx] = self.value
        return w_pos, w_neg

    def to_json_dict(self) -> dict:
        if self.kind == "signed_mean_gaussian":
            params = [self.mean_pos, self.mean_neg, self.variance]
        elif self.kind == "constant_sigma":
            params = [self.value]
        else:
            params = []
        return {"p": self.p, "kind": self.kind, "params": params}

    @staticmethod
    def from_json_dict(doc: dict) -> "AttackPolicy":
        kind = doc.get("kind", "none")
        params = doc.get("params", [])
        if kind == "signed_mean_gaussian":
            return AttackPolicy(p=doc["p"], kind=kind, mean_pos=params[0], mean_neg=params[1], variance=params[2])
        if kind == "constant_sigma":
            return AttackPolicy(p=doc["p"], kind=kind, value=params[0])
        return AttackPolicy(p=doc["p"], kind="none")


def check_attack_probability(p: float, tau: int, enforce: bool = True) -> bool:
    """Validate p < 1/(2 tau); warn-and-proceed when enforcement is off."""
    ok = p < 1.0 / (2 * tau)
    if not ok:
        msg = f"attack probability p={p:.4g} violates p < 1/(2*tau) = {1.0/(2*tau):.4g}"
        if enforce:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)
    return ok


def max_attack_free_run(flags) -> int:
    """Length of the longest run of consecutive zeros in the flag sequence."""
    best = cur = 0
    for f in np.asarray(flags).ravel():
        if f:
            cur = 0
        else:
            cur += 1
            if cur > best:
                best = cur
    return best
