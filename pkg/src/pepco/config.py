"""Flat run configuration: ``key = value`` lines plus overrides.

Every run writes its fully resolved configuration next to its outputs,
so any artifact can be reproduced from the directory that holds it.
"""
from __future__ import annotations

from pathlib import Path

from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


# key -> (parser, default); None means "must be set before use"
SCHEMA: dict[str, tuple] = {
    "task": (str, "regression"),
    "fusion": (str, "repcon"),
    "dataset": (str, None),
    "out_dir": (str, "runs/latest"),
    "epochs": (int, 30),
    "batch_size": (int, 32),
    "learning_rate": (float, 1e-3),
    "seed": (int, 0),
    "lambda": (float, 1e-4),
    "tau": (float, 0.5),
    "delta": (float, 0.5),
    "hidden_dim": (int, 64),
    "heads": (int, 4),
    "seq_layers": (int, 2),
    "ff_dim": (int, 128),
    "graph_layers": (int, 3),
    "predictor_hidden": (_parse_int_tuple, (64,)),
    "max_len": (int, 50),
    "n_classes": (int, 2),
    "beta1": (float, 0.9),
    "beta2": (float, 0.999),
    "adam_eps": (float, 1e-8),
    "l2_normalize": (_parse_bool, False),
    "train_ratio": (float, 0.8),
    "val_ratio": (float, 0.1),
    "test_ratio": (float, 0.1),
    "ig_steps": (int, 300),
}


class RunConfig:
    def __init__(self, values: dict | None = None):
        self.values = {key: default for key, (_, default) in SCHEMA.items()}
        if values:
            for key, value in values.items():
                self.set(key, value)

    def set(self, key: str, raw) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        parser = SCHEMA[key][0]
        if isinstance(raw, str):
            try:
                self.values[key] = parser(raw)
            except ValueError as e:
                raise ConfigError(f"config key {key!r}: cannot parse {raw!r} ({e})")
        else:
            self.values[key] = raw

    def __getitem__(self, key: str):
        return self.values[key]

    def require(self, key: str):
        value = self.values[key]
        if value is None:
            raise ConfigError(f"config key {key!r} is required but not set")
        return value

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(
            task=v["task"], fusion=v["fusion"], epochs=v["epochs"],
            batch_size=v["batch_size"], learning_rate=v["learning_rate"],
            seed=v["seed"], lambda_=v["lambda"], tau=v["tau"], delta=v["delta"],
            hidden_dim=v["hidden_dim"], heads=v["heads"], seq_layers=v["seq_layers"],
            ff_dim=v["ff_dim"], graph_layers=v["graph_layers"],
            predictor_hidden=v["predictor_hidden"], max_len=v["max_len"],
            n_classes=v["n_classes"], beta1=v["beta1"], beta2=v["beta2"],
            adam_eps=v["adam_eps"], l2_normalize=v["l2_normalize"],
        )

    def ratios(self) -> tuple[float, float, float]:
        return (self.values["train_ratio"], self.values["val_ratio"],
                self.values["test_ratio"])

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for key in SCHEMA:
                value = self.values[key]
                if value is None:
                    continue
                fh.write(f"{key} = {_fmt(value)}\n")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = RunConfig()
    for line_num, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path} line {line_num}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        cfg.set(key.strip(), raw.strip())
    return cfg


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        cfg.set(key.strip(), raw.strip())
