"""Run configuration: INI files, typed sections, flag overrides, hashing.

A config file uses the sections [run], [search], [derive], [train],
[synth], and [bench]; every key has a default, unknown sections or keys
are errors, and CLI flags override file values. The resolved configuration
(defaults + file + flags) renders to canonical ``section.key=value`` lines
whose sha256 is stamped into artifacts, so identical inputs yield
identical outputs byte for byte.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .artifacts import config_hash
from .derive import DeriveConfig
from .errors import ConfigError
from .search import SearchConfig
from .synth import RelationSpec, SynthSpec


def _parse_bool(text: str, name: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{name} must be a boolean, got {text!r}")


def _parse_tristate(text: str, name: str) -> bool | None:
    low = text.strip().lower()
    if low == "auto":
        return None
    return _parse_bool(low, name)


def _parse_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {text!r}") from None


def _parse_float(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {text!r}") from None


def _parse_opt_epochs(text: str, name: str) -> int | None:
    if text.strip().lower() == "auto":
        return None
    return _parse_int(text, name)


def _render(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunSection:
    task: str = "classification"
    dataset: str = ""
    out: str = ""
    seed: int = 0


@dataclass
class SearchSection:
    mode: str = "partial"
    epochs: int = 30
    p: int = 2
    lr_omega: float = 0.01
    lr_alpha: float = 0.003
    weight_decay: float = 5e-4
    depth: int = 4
    hidden: int = 64
    runs: int = 3
    transform: bool | None = None
    biased_one_path: bool = False
    select_by: str = "metric"


@dataclass
class DeriveSection:
    lambda_seq: float = 0.9
    lambda_res: float = 0.9


@dataclass
class TrainSection:
    epochs: int | None = None
    hidden: int = 64
    lr: float = 0.01
    weight_decay: float = 5e-4
    patience: int = 10
    eval_seeds: int = 10
    transform: bool | None = None


@dataclass
class SynthSection:
    types: str = "A:150,P:90,C:60"
    relations: str = "AP:A:P:4,PC:P:C:4"
    chains: str = "AP>PC"
    target: str = "A"
    groups: int = 3
    noise: float = 0.0
    mix: float = 0.05
    distractors: int = 2
    train_frac: float = 0.6
    val_frac: float = 0.2


@dataclass
class BenchSection:
    modes: str = "partial,one_path"
    seeds: str = "0-9"
    steps: str = "2,3,4"
    train_seeds: int = 3
    workers: int = 1


# dataclass field annotations are strings under deferred evaluation
_PARSERS = {
    "str": lambda text, name: text,
    "int": _parse_int,
    "float": _parse_float,
    "bool": _parse_bool,
    "bool | None": _parse_tristate,
    "int | None": _parse_opt_epochs,
}


@dataclass
class RunConfig:
    """All sections, resolved to typed values."""

    run: RunSection = field(default_factory=RunSection)
    search: SearchSection = field(default_factory=SearchSection)
    derive: DeriveSection = field(default_factory=DeriveSection)
    train: TrainSection = field(default_factory=TrainSection)
    synth: SynthSection = field(default_factory=SynthSection)
    bench: BenchSection = field(default_factory=BenchSection)

    def sections(self) -> dict[str, object]:
        return {
            "run": self.run,
            "search": self.search,
            "derive": self.derive,
            "train": self.train,
            "synth": self.synth,
            "bench": self.bench,
        }

    def set_value(self, section: str, key: str, raw: str) -> None:
        """Parse and assign one ``section.key`` from its string form."""
        secs = self.sections()
        if section not in secs:
            raise ConfigError(f"unknown config section [{section}]")
        target = secs[section]
        for f in fields(target):
            if f.name == key:
                parser = _PARSERS.get(str(f.type), _PARSERS["str"])
                setattr(target, key, parser(raw, f"{section}.{key}"))
                return
        raise ConfigError(f"unknown config key {key!r} in section [{section}]")

    def canonical_sections(self) -> dict[str, dict[str, str]]:
        out: dict[str, dict[str, str]] = {}
        for name, sec in self.sections().items():
            out[name] = {f.name: _render(getattr(sec, f.name)) for f in fields(sec)}
        return out

    def hash(self) -> str:
        return config_hash(self.canonical_sections())

    # -- views -----------------------------------------------------------

    def search_config(self) -> SearchConfig:
        return SearchConfig(
            mode=self.search.mode,
            epochs=self.search.epochs,
            p=self.search.p,
            lr_omega=self.search.lr_omega,
            lr_alpha=self.search.lr_alpha,
            weight_decay=self.search.weight_decay,
            depth=self.search.depth,
            hidden=self.search.hidden,
            seed=self.run.seed,
            runs=self.search.runs,
            task=self.run.task,
            transform=self.search.transform,
            biased_one_path=self.search.biased_one_path,
            select_by=self.search.select_by,
        )

    def derive_config(self) -> DeriveConfig:
        return DeriveConfig(self.derive.lambda_seq, self.derive.lambda_res)

    def synth_spec(self) -> SynthSpec:
        sec = self.synth
        counts: dict[str, int] = {}
        for item in _split_list(sec.types, "synth.types"):
            t, _, n = item.partition(":")
            if not n:
                raise ConfigError(f"synth.types entry {item!r} must look like NAME:COUNT")
            counts[t] = _parse_int(n, "synth.types count")
        rels = []
        for item in _split_list(sec.relations, "synth.relations"):
            bits = item.split(":")
            if len(bits) != 4:
                raise ConfigError(
                    f"synth.relations entry {item!r} must look like NAME:SRC:DST:DEGREE"
                )
            rels.append(
                RelationSpec(bits[0], bits[1], bits[2], _parse_int(bits[3], "out_degree"))
            )
        chains = tuple(
            tuple(part.split(">"))
            for part in _split_list(sec.chains, "synth.chains", sep="|")
        )
        return SynthSpec(
            node_counts=counts,
            relations=tuple(rels),
            target_type=sec.target,
            chains=chains,
            groups=sec.groups,
            noise=sec.noise,
            mix=sec.mix,
            distractors=sec.distractors,
            train_frac=sec.train_frac,
            val_frac=sec.val_frac,
            seed=self.run.seed,
        )

    def bench_seeds(self) -> list[int]:
        return _parse_int_set(self.bench.seeds, "bench.seeds")

    def bench_steps(self) -> list[int]:
        return _parse_int_set(self.bench.steps, "bench.steps")

    def bench_modes(self) -> list[str]:
        return _split_list(self.bench.modes, "bench.modes")


def _split_list(text: str, name: str, sep: str = ",") -> list[str]:
    items = [part.strip() for part in text.split(sep) if part.strip()]
    if not items:
        raise ConfigError(f"{name} must list at least one entry")
    return items


def _parse_int_set(text: str, name: str) -> list[int]:
    """Parse '0-9' ranges and comma lists into a sorted unique int list."""
    out: set[int] = set()
    for part in _split_list(text, name):
        if "-" in part[1:]:
            lo, _, hi = part.partition("-")
            lo_i = _parse_int(lo, name)
            hi_i = _parse_int(hi, name)
            if hi_i < lo_i:
                raise ConfigError(f"{name} range {part!r} is reversed")
            out.update(range(lo_i, hi_i + 1))
        else:
            out.add(_parse_int(part, name))
    return sorted(out)


def load_config(path: str | Path | None) -> RunConfig:
    """Defaults, overlaid with an INI file when given."""
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        for key, raw in parser.items(section):
            cfg.set_value(section, key, raw)
    return cfg
