"""Bundled configurations and the glue that turns one into a running server."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .foldylax import ScatteringState, sample_state, scattering_matrix
from .holography import DEFAULT_RC
from .inversion import DEFAULT_EPSILON_REL
from .protocol import FIELD, EncryptionServer, ReferenceSettings, fit_to_grid
from .scene import Scene, build_scene
from .store import read_json, read_pgm

BUNDLED_CONFIGS = ("desk", "desk_holo", "paper")


@dataclass(frozen=True)
class RunSettings:
    L: int = 4
    subset_size: int = 3
    users: int = 3
    epsilon_rel: float = DEFAULT_EPSILON_REL
    mode: str = FIELD
    reference: ReferenceSettings = ReferenceSettings()
    rc_hologram: float = DEFAULT_RC
    rc_sensor: float = DEFAULT_RC
    trials: int = 20
    seeds: dict = field(default_factory=lambda: {"medium": 0, "server": 0, "keys": 0, "attack": 0})

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "RunSettings":
        run = dict(cfg.get("run", {}))
        ref = run.pop("reference", {})
        seeds = {**cls().seeds, **run.pop("seeds", {})}
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in run.items() if k in known}
        return cls(reference=ReferenceSettings(**ref), seeds=seeds, **kwargs)

    def with_overrides(self, **kw) -> "RunSettings":
        seeds = dict(self.seeds)
        for name in ("medium", "server", "keys", "attack"):
            v = kw.pop(f"seed_{name}", None)
            if v is not None:
                seeds[name] = int(v)
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, seeds=seeds, **kw)


def load_config(name_or_path: str | Path) -> dict:
    """A bundled config by name (``desk``, ``desk_holo``, ``paper``) or a JSON file path."""
    p = Path(name_or_path)
    if str(name_or_path) in BUNDLED_CONFIGS:
        text = resources.files("scatter_crypt").joinpath(f"configs/{name_or_path}.json").read_text()
        import json
        return json.loads(text)
    return read_json(p)


def bundled_plaintexts() -> list[np.ndarray]:
    out = []
    for i in (1, 2, 3):
        with resources.as_file(resources.files("scatter_crypt").joinpath(f"data/plaintext_{i}.pgm")) as f:
            out.append(read_pgm(f))
    return out


@dataclass
class Experiment:
    scene: Scene
    settings: RunSettings
    states: list[ScatteringState]
    matrices: list[np.ndarray]

    @classmethod
    def build(cls, config: Mapping[str, Any], settings: RunSettings | None = None) -> "Experiment":
        scene = build_scene(config)
        settings = settings or RunSettings.from_config(config)
        states = [sample_state(scene.medium, l, settings.seeds["medium"]) for l in range(1, settings.L + 1)]
        matrices = [scattering_matrix(s, scene).entries for s in states]
        return cls(scene, settings, states, matrices)

    def server(self, **kw) -> EncryptionServer:
        s = self.settings
        opts = dict(server_seed=s.seeds["server"], key_seed=s.seeds["keys"],
                    users=range(1, s.users + 1), subset_size=s.subset_size,
                    epsilon_rel=s.epsilon_rel, mode=s.mode, reference=s.reference,
                    rc_hologram=s.rc_hologram, rc_sensor=s.rc_sensor)
        opts.update(kw)
        return EncryptionServer(self.scene, self.matrices, **opts)

    def plaintexts(self) -> list[np.ndarray]:
        return [fit_to_grid(p, self.scene.sensor.shape) for p in bundled_plaintexts()]
