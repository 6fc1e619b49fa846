"""Scenario parameters for the multi-cell uplink/downlink simulation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional, Tuple

FADING_MODES = ("correlated", "iid")


class ConfigError(ValueError):
    """Raised when a configuration is incomplete or violates a constraint."""


def db2lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin2db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemConfig:
    """Immutable description of one scenario.

    Powers and noise variances are linear. ``rho``, ``snr_db`` and ``M`` are
    derived and never stored.

    Parameters
    ----------
    L : int
        Number of interfering cells; cell 0 is the cell of interest.
    K : int
        Users per cell.
    N_t, N_e : int
        Antennas at each base station and at the eavesdropper.
    T, tau : int
        Coherence block length and pilot length, in symbols.
    P0, P_l : float
        Uplink power of cell-0 users and of users in cells ``1..L``.
        ``P_l`` defaults to ``P0``. ``P_cells`` optionally overrides it
        per interfering cell.
    Pe : float
        Total attack power of the eavesdropper.
    P : float
        Downlink power per stream.
    N0, N0d : float
        Uplink and downlink noise variances.
    fading : {"correlated", "iid"}
        Spatial correlation model used by :mod:`secmimo.channel`.
    theta_b, sigma, beta : float
        Half-width of the angle-of-arrival interval, angular spread of the
        power angle spectrum (radians) and the cross-cell power factor.
    """

    L: int
    K: int
    N_t: int
    T: int
    tau: int
    P0: float
    Pe: float
    N0: float = 1.0
    N_e: int = 2
    P_l: Optional[float] = None
    P_cells: Optional[Tuple[float, ...]] = None
    P: float = 1.0
    N0d: float = 1.0
    fading: str = "correlated"
    theta_b: float = math.pi
    sigma: float = math.pi / 2
    beta: float = 0.1

    def __post_init__(self):
        if self.P_l is None:
            object.__setattr__(self, "P_l", self.P0)
        if self.P_cells is not None:
            object.__setattr__(self, "P_cells", tuple(float(p) for p in self.P_cells))
        self._validate()

    def _validate(self):
        for name in ("L", "K", "N_t", "N_e", "T", "tau"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.L < 0:
            raise ConfigError(f"L must be >= 0 (L={self.L})")
        for name in ("K", "N_t", "N_e", "T", "tau"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1 ({name}={getattr(self, name)})")
        if self.K > self.tau:
            raise ConfigError(f"K ≤ tau violated (K={self.K}, tau={self.tau})")
        if self.tau >= self.T:
            raise ConfigError(f"tau < T violated (tau={self.tau}, T={self.T})")
        if self.M > self.N_t:
            raise ConfigError(f"M ≤ N_t violated (M={self.M}, N_t={self.N_t})")
        for name in ("P0", "P_l", "Pe", "P", "N0", "N0d"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be strictly positive (got {value!r})")
        if self.P_cells is not None:
            if len(self.P_cells) != self.L:
                raise ConfigError(
                    f"P_cells must list one power per interfering cell "
                    f"(got {len(self.P_cells)}, L={self.L})")
            if any(not (math.isfinite(p) and p > 0) for p in self.P_cells):
                raise ConfigError("P_cells entries must be strictly positive")
        if self.fading not in FADING_MODES:
            raise ConfigError(f"fading must be one of {FADING_MODES}, got {self.fading!r}")
        if not (0 < self.theta_b <= math.pi):
            raise ConfigError(f"theta_b must lie in (0, pi] (got {self.theta_b})")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be > 0 (got {self.sigma})")
        if not (0 < self.beta <= 1):
            raise ConfigError(f"beta must lie in (0, 1] (got {self.beta})")

    # derived quantities

    @property
    def M(self) -> int:
        return (self.L + 1) * self.K + self.N_e

    @property
    def rho(self) -> float:
        return self.Pe / (self.P0 * self.K)

    @property
    def rho_db(self) -> float:
        return lin2db(self.rho)

    @property
    def snr_db(self) -> float:
        return lin2db(self.P / self.N0d)

    def uplink_power(self, cell: int) -> float:
        """Uplink power of the users in ``cell``."""
        if cell == 0:
            return self.P0
        if self.P_cells is not None:
            return self.P_cells[cell - 1]
        return self.P_l

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        return replace(self, P=db2lin(snr_db) * self.N0d)

    def with_rho_db(self, rho_db: float) -> "SystemConfig":
        return replace(self, Pe=db2lin(rho_db) * self.P0 * self.K)

    # serialization

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["P_cells"] is None:
            del out["P_cells"]
        else:
            out["P_cells"] = list(out["P_cells"])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        """Build a config from a flat mapping.

        Keys ending in ``_db`` (``rho_db``, ``snr_db``) are converted to the
        linear ``Pe`` and ``P``; giving both forms of the same quantity is
        an error.
        """
        data = dict(data)
        known = {f.name for f in fields(cls)}
        rho_db = data.pop("rho_db", None)
        snr_db = data.pop("snr_db", None)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
        for key in ("L", "K", "N_t", "T", "tau", "P0"):
            if key not in data:
                raise ConfigError(f"missing key: {key}")
        if rho_db is not None:
            if "Pe" in data:
                raise ConfigError("give either Pe or rho_db, not both")
            data["Pe"] = db2lin(float(rho_db)) * float(data["P0"]) * int(data["K"])
        elif "Pe" not in data:
            raise ConfigError("missing key: Pe (or rho_db)")
        if snr_db is not None:
            if "P" in data:
                raise ConfigError("give either P or snr_db, not both")
            data["P"] = db2lin(float(snr_db)) * float(data.get("N0d", 1.0))
        for key in ("P0", "Pe", "P", "N0", "N0d", "P_l", "theta_b", "sigma", "beta"):
            if data.get(key) is not None:
                data[key] = float(data[key])
        if data.get("P_cells") is not None:
            data["P_cells"] = tuple(data["P_cells"])
        return cls(**data)


def load_config(path: Any) -> SystemConfig:
    """Read a flat JSON object from ``path`` and validate it."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return SystemConfig.from_dict(data)


def save_config(cfg: SystemConfig, path: Any) -> None:
    Path(path).write_text(cfg.to_json() + "\n")
