"""JSON config files: training, encoder, and camera-policy keys.

Schema: {"version": 1, "train": {TrainConfig keys}, "encoder":
{EncoderConfig keys}}. Both sections are optional and partial; unknown
keys anywhere are rejected so typos fail loudly. The camera policy
(image_size, radius, fov_y) lives inside the train section.
"""

from __future__ import annotations

import json

from .encoder import EncoderConfig
from .training import TrainConfig

CONFIG_VERSION = 1


class ConfigError(Exception):
    pass


def _merge(defaults, overrides: dict, what: str):
    known = defaults.to_dict()
    unknown = set(overrides) - set(known)
    if unknown:
        raise ConfigError(f"unknown {what} config keys: {sorted(unknown)}")
    merged = dict(known)
    merged.update(overrides)
    return type(defaults).from_dict(merged)


def load_config(path=None):
    """Returns (TrainConfig, EncoderConfig), defaults when path is None."""
    train = TrainConfig()
    encoder = EncoderConfig()
    if path is None:
        return train, encoder
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config root must be an object")
    unknown = set(data) - {"version", "train", "encoder"}
    if unknown:
        raise ConfigError(f"{path}: unknown config sections: {sorted(unknown)}")
    if data.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise ConfigError(f"{path}: unsupported config version {data.get('version')!r}")
    try:
        if "train" in data:
            train = _merge(train, data["train"], "train")
        if "encoder" in data:
            encoder = _merge(encoder, data["encoder"], "encoder")
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}")
    return train, encoder


def save_config(path, train: TrainConfig, encoder: EncoderConfig) -> None:
    data = {"version": CONFIG_VERSION, "train": train.to_dict(),
            "encoder": encoder.to_dict()}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
