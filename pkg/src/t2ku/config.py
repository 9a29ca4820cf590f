"""Service configuration: defaults, JSON file, T2KU_CONFIG env override,
CLI flags on top."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .infer import Limits
from .tptp import SelectionParams

ENV_VAR = "T2KU_CONFIG"


@dataclass
class Config:
    port: int = 8420
    lease_seconds: float = 30.0
    global_timeout_seconds: float = 120.0
    data_dir: str = "./t2ku_data"
    limits: Limits = field(default_factory=Limits)
    selection: SelectionParams = field(default_factory=SelectionParams)

    def to_dict(self) -> dict:
        return {
            "port": self.port,
            "lease_seconds": self.lease_seconds,
            "global_timeout_seconds": self.global_timeout_seconds,
            "data_dir": self.data_dir,
            "limits": {
                "max_depth": self.limits.max_depth,
                "step_budget": self.limits.step_budget,
                "time_budget": self.limits.time_budget,
                "term_depth": self.limits.term_depth,
            },
            "selection": {
                "max_axioms": self.selection.max_axioms,
                "max_hops": self.selection.max_hops,
                "tolerance": self.selection.tolerance,
            },
        }


def load_config(path: str | None = None, overrides: dict | None = None) -> Config:
    """Defaults, then the config file (explicit path beats T2KU_CONFIG),
    then explicit overrides."""
    data: dict = {}
    chosen = path or os.environ.get(ENV_VAR)
    if chosen:
        data = json.loads(Path(chosen).read_text(encoding="utf-8"))
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("limits", "selection"):
                data.setdefault(key, {}).update(value)
            else:
                data[key] = value
    limits_data = data.get("limits", {})
    selection_data = data.get("selection", {})
    return Config(
        port=int(data.get("port", 8420)),
        lease_seconds=float(data.get("lease_seconds", 30.0)),
        global_timeout_seconds=float(data.get("global_timeout_seconds", 120.0)),
        data_dir=str(data.get("data_dir", "./t2ku_data")),
        limits=Limits(
            max_depth=int(limits_data.get("max_depth", 8)),
            step_budget=int(limits_data.get("step_budget", 1_000_000)),
            time_budget=float(limits_data.get("time_budget", 10.0)),
            term_depth=int(limits_data.get("term_depth", 2)),
        ),
        selection=SelectionParams(
            max_axioms=int(selection_data.get("max_axioms", 64)),
            max_hops=int(selection_data.get("max_hops", 3)),
            tolerance=float(selection_data.get("tolerance", 1.5)),
        ),
    )
