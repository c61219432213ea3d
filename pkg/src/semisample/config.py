"""Declarative run configuration: YAML files plus CLI-style overrides.

One file can carry an ``augmentation`` section, and for simulations also
``simulation`` and ``noise`` sections. Keys mirror the dataclass fields;
unknown keys are errors so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path
from typing import Mapping

import yaml

from .augmentor import AugmentationConfig, CollisionMode
from .errors import FormatError, InputError
from .simulation import NoiseModel, SimulationConfig


def load_yaml(path) -> dict:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: invalid YAML: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise FormatError(f"{path}: config must be a mapping")
    return raw


def _check_keys(section: Mapping, allowed, where: str):
    unknown = set(section) - set(allowed)
    if unknown:
        raise InputError(f"unknown {where} keys: {sorted(unknown)}")


def augmentation_from_mapping(section: Mapping) -> AugmentationConfig:
    names = [f.name for f in fields(AugmentationConfig)]
    _check_keys(section, names, "augmentation config")
    kwargs = dict(section)
    if "collision_mode" in kwargs:
        kwargs["collision_mode"] = CollisionMode(kwargs["collision_mode"])
    try:
        return AugmentationConfig(**kwargs)
    except TypeError as exc:
        raise InputError(f"bad augmentation config: {exc}") from None


def noise_from_mapping(section: Mapping) -> NoiseModel:
    names = [f.name for f in fields(NoiseModel)]
    _check_keys(section, names, "noise config")
    return NoiseModel(**section)


def simulation_from_config(doc: Mapping) -> SimulationConfig:
    _check_keys(doc, ("augmentation", "simulation", "noise"), "top-level config")
    if "augmentation" not in doc:
        raise InputError("simulation config needs an 'augmentation' section")
    augmentation = augmentation_from_mapping(doc["augmentation"])
    noise = noise_from_mapping(doc.get("noise", {}))
    section = dict(doc.get("simulation", {}))
    names = [f.name for f in fields(SimulationConfig) if f.name not in ("augmentation", "noise")]
    _check_keys(section, names, "simulation config")
    return SimulationConfig(augmentation=augmentation, noise=noise, **section)


def augmentation_from_config(doc: Mapping) -> AugmentationConfig:
    if "augmentation" in doc:
        return augmentation_from_mapping(doc["augmentation"])
    return augmentation_from_mapping(doc)


def preset_augmentation(name: str, categories=()) -> AugmentationConfig:
    if name == "outdoor":
        return AugmentationConfig.outdoor()
    if name == "indoor":
        if not categories:
            raise InputError("indoor preset needs the manifest's category list")
        return AugmentationConfig.indoor(categories)
    raise InputError(f"unknown preset {name!r} (expected 'outdoor' or 'indoor')")


def parse_kv_pairs(pairs, value_type, what: str) -> dict:
    """Parse repeated ``category=value`` CLI tokens into a dict."""
    out = {}
    for token in pairs or ():
        if "=" not in token:
            raise InputError(f"bad {what} {token!r}, expected category=value")
        key, _, value = token.partition("=")
        try:
            out[key] = value_type(value)
        except ValueError:
            raise InputError(f"bad {what} value in {token!r}") from None
    return out
