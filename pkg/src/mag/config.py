"""Experiment configuration: namespaced sections, strict parsing, overrides.

Every tunable in the pipeline lives here so that a persisted config plus a
seed fully determines a run. Unknown keys are rejected by name, and the
persisted copy always materializes every default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .features import MfccConfig


class ConfigError(ValueError):
    pass


@dataclass
class DataSettings:
    n_clips: int = 500
    n_frames: int = 32
    n_joints: int = 13
    n_speakers: int = 3
    fps: float = 15.0
    beat_period: float = 0.5


@dataclass
class FeatureSettings:
    sample_rate: int = 16000
    n_fft: int = 512
    hop: int = 160
    n_mels: int = 26
    n_mfcc: int = 13
    f_min: float = 0.0
    f_max: float = 8000.0
    d_text: int = 32
    d_hl: int = 32
    d_align: int = 64
    aligner_epochs: int = 30
    aligner_lr: float = 1e-3
    aligner_tau: float = 0.1
    aligner_batch: int = 32
    aligner_held_out: int = 32


@dataclass
class VaeSettings:
    d_latent: int = 64
    tcn_layers: int = 4
    tcn_channels: int = 128
    kernel_size: int = 3
    lambda_c: float = 0.1
    lambda_kl: float = 1e-4
    tau: float = 0.07
    variant: str = "mta"  # mta | mt | ma | vae | vq
    epochs: int = 200
    batch_size: int = 64
    lr: float = 2e-3
    d_att: int = 32
    vq_codebook: int = 256
    vq_commitment: float = 0.25
    vq_ema_decay: float = 0.99


@dataclass
class HgatSettings:
    enabled: bool = True
    window: int = 8
    d_a: int = 64
    d_cond: int = 128
    n_heads: int = 4
    speaker_in_fusion: bool = True


@dataclass
class MmagSettings:
    n_diff: int = 100
    schedule: str = "cosine"
    steps: int = 8
    r_min: float = 0.5
    chunk: int = 4  # motion frames per token
    d_model: int = 256
    n_layers: int = 4
    n_heads: int = 4
    d_mlp: int = 256
    mlp_blocks: int = 4
    speaker_in_transformer: bool = True
    epochs: int = 40
    batch_size: int = 32
    lr: float = 1e-3


@dataclass
class MetricsSettings:
    bc_sigma: float = 0.1
    shrinkage: float = 1e-6
    beat_min_separation: float = 0.1


_SECTIONS = {
    "data": DataSettings,
    "features": FeatureSettings,
    "vae": VaeSettings,
    "hgat": HgatSettings,
    "mmag": MmagSettings,
    "metrics": MetricsSettings,
}


@dataclass
class ExperimentConfig:
    data: DataSettings = field(default_factory=DataSettings)
    features: FeatureSettings = field(default_factory=FeatureSettings)
    vae: VaeSettings = field(default_factory=VaeSettings)
    hgat: HgatSettings = field(default_factory=HgatSettings)
    mmag: MmagSettings = field(default_factory=MmagSettings)
    metrics: MetricsSettings = field(default_factory=MetricsSettings)
    seed: int = 0
    out_dir: str = "runs"

    def to_dict(self) -> dict:
        out = {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}
        out["seed"] = self.seed
        out["out_dir"] = self.out_dir
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        cfg = cls()
        for key, value in payload.items():
            if key == "seed":
                cfg.seed = int(value)
            elif key == "out_dir":
                cfg.out_dir = str(value)
            elif key in _SECTIONS:
                section = getattr(cfg, key)
                known = {f.name: f for f in dataclasses.fields(section)}
                for sub_key, sub_value in value.items():
                    if sub_key not in known:
                        raise ConfigError(f"unknown config key {key}.{sub_key}")
                    setattr(section, sub_key, _coerce(known[sub_key].type, sub_value,
                                                      f"{key}.{sub_key}"))
            else:
                raise ConfigError(f"unknown config section {key!r}")
        return cfg

    def apply_override(self, assignment: str) -> None:
        """Apply one ``section.key=value`` override string."""
        if "=" not in assignment:
            raise ConfigError(f"override {assignment!r} is not of the form key=value")
        dotted, raw = assignment.split("=", 1)
        parts = dotted.strip().split(".")
        if len(parts) == 1 and parts[0] in ("seed", "out_dir"):
            if parts[0] == "seed":
                self.seed = int(raw)
            else:
                self.out_dir = raw
            return
        if len(parts) != 2 or parts[0] not in _SECTIONS:
            raise ConfigError(f"unknown config field {dotted!r}")
        section = getattr(self, parts[0])
        known = {f.name: f for f in dataclasses.fields(section)}
        if parts[1] not in known:
            raise ConfigError(f"unknown config key {dotted!r}")
        setattr(section, parts[1], _coerce(known[parts[1]].type, raw, dotted))

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def mfcc_config(self) -> MfccConfig:
        f = self.features
        return MfccConfig(
            sample_rate=f.sample_rate, n_fft=f.n_fft, hop=f.hop, n_mels=f.n_mels,
            n_mfcc=f.n_mfcc, f_min=f.f_min, f_max=f.f_max,
        )


def _coerce(annotation, value, where: str):
    # dataclass field types arrive as strings under `from __future__ import annotations`
    type_name = annotation if isinstance(annotation, str) else annotation.__name__
    try:
        if type_name == "bool":
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("true", "1", "yes"):
                return True
            if str(value).lower() in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if type_name == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if type_name == "float":
            return float(value)
        if type_name == "str":
            return str(value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value for {where}: {value!r}") from err
    raise ConfigError(f"unsupported config field type {type_name} at {where}")
