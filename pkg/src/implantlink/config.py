"""Service configuration and the pinned readout acceptance operating point."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

# Operating point for the readout robustness suite, pinned from a calibration
# sweep of the full pipeline (see tests/test_acceptance.py). At this point the
# measured success rates were 999/1000 (pharmacode) and 1000/1000 (code128).
PINNED_READOUT = {
    "samples_per_module": 12,
    "blur_sigma_modules": 0.3,
    "noise_sigma_fraction": 0.05,
    "trials": 1000,
    "min_success_rate": 0.99,
    "monotone_noise_grid": [0.0, 0.02, 0.05, 0.10, 0.20, 0.40],
    "monotone_trials_per_level": 200,
}

DEFAULT_EMERGENCY_POLICY = {
    "conditions": [["spo2", "<", 90.0], ["systolic_bp", "<", 80.0]],
    "required_simultaneous": 2,
    "simultaneity_window_s": 60.0,
    "grant_ttl_s": 3600.0,
}

_ENV_PREFIX = "IMPLANTLINK_"


@dataclass
class EcosystemConfig:
    store_dir: str = "./implantlink-store"
    server_key: str = "change-me-development-key"
    admin_token: str = "change-me-admin-token"
    port: int = 8432
    session_ttl_s: float = 8 * 3600.0
    export_role: str = "medical_staff"
    emergency_policy: dict = field(default_factory=lambda: dict(DEFAULT_EMERGENCY_POLICY))

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None) -> "EcosystemConfig":
        """Config file values overridden by IMPLANTLINK_* environment variables."""
        data: dict = {}
        if path is not None:
            data = json.loads(Path(path).read_text())
        env = dict(os.environ if env is None else env)
        config = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        for name in ("store_dir", "server_key", "admin_token", "export_role"):
            value = env.get(_ENV_PREFIX + name.upper())
            if value is not None:
                setattr(config, name, value)
        if env.get(_ENV_PREFIX + "PORT"):
            config.port = int(env[_ENV_PREFIX + "PORT"])
        if env.get(_ENV_PREFIX + "SESSION_TTL_S"):
            config.session_ttl_s = float(env[_ENV_PREFIX + "SESSION_TTL_S"])
        return config
