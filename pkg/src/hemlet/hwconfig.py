"""Hardware parameter model for heterogeneous CIM chiplet packages.

All timing (ns) and energy (pJ) constants are inputs. The shipped
``reference.toml`` holds plausible, uncalibrated defaults.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .workload import MODELS, ViTModelSpec, get_model, total_static_weights

REFERENCE_CONFIG = Path(__file__).parent / "data" / "reference.toml"
REF_CONFIG_ENV = "HEMLET_REF_CONFIG"


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [Diagnostic("", diagnostics)]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}" if self.path else self.message


@dataclass(frozen=True)
class ACIMConfig:
    pe_per_chiplet: int = 32
    sa_per_pe: int = 60
    sa_rows: int = 128
    sa_cols: int = 128
    group_size: int = 8
    cell_bits: int = 2
    adc_bits: int = 9
    t_adc: float = 2.0
    e_adc: float = 0.4
    e_mac_row: float = 0.002
    t_row: float = 2.0

    def slices(self, weight_bits: int) -> int:
        """Physical columns (bit slices) per logical weight column."""
        return -(-weight_bits // self.cell_bits)

    def logical_cols(self, weight_bits: int) -> int:
        return self.sa_cols // self.slices(weight_bits)

    def groups_per_sa(self, weight_bits: int) -> int:
        return self.logical_cols(weight_bits) // self.group_size

    @property
    def sa_per_chiplet(self) -> int:
        return self.pe_per_chiplet * self.sa_per_pe


@dataclass(frozen=True)
class DCIMConfig:
    pe_per_chiplet: int = 16
    sa_per_pe: int = 4
    sa_rows: int = 64
    sa_cols: int = 64
    t_cycle: float = 1.0
    e_mac: float = 0.03
    t_write: float = 1.0
    e_write: float = 0.5
    chiplet_buffer_bytes: int = 524288


@dataclass(frozen=True)
class IDPConfig:
    sram_bank_count: int = 16
    bank_bytes: int = 131072
    simd_width: int = 256
    t_simd: float = 1.0
    e_simd: float = 0.05
    e_buf_r: float = 0.1
    e_buf_w: float = 0.12


@dataclass(frozen=True)
class NoPConfig:
    mesh_x: int = 0
    mesh_y: int = 0
    bw: float = 32.0
    t_hop: float = 20.0
    e_bit: float = 0.6
    link_contention: bool = False


@dataclass(frozen=True)
class SystemConfig:
    acim: ACIMConfig = field(default_factory=ACIMConfig)
    dcim: DCIMConfig = field(default_factory=DCIMConfig)
    idp: IDPConfig = field(default_factory=IDPConfig)
    nop: NoPConfig = field(default_factory=NoPConfig)
    n_acim_chiplets: int = 0  # 0: smallest count that holds the mapping
    n_dcim_chiplets: int = 2
    n_idp_chiplets: int = 1
    chiplet_buffer: tuple[float, float] = (0.004, 0.1)
    local_buffer: tuple[float, float] = (0.005, 0.08)
    intra_ic: tuple[float, float] = (0.01, 0.08)
    block_tokens: int = 32
    clock_mhz: float = 500.0

    @property
    def label(self) -> str:
        return f"A{self.acim.pe_per_chiplet}D{self.dcim.pe_per_chiplet}"

    @property
    def n_chiplets(self) -> int:
        return self.n_acim_chiplets + self.n_dcim_chiplets + self.n_idp_chiplets

    def mesh_dims(self) -> tuple[int, int]:
        if self.nop.mesh_x and self.nop.mesh_y:
            return self.nop.mesh_x, self.nop.mesh_y
        side = math.isqrt(self.n_chiplets - 1) + 1 if self.n_chiplets > 1 else 1
        return side, -(-self.n_chiplets // side)

    def replace(self, **changes) -> "SystemConfig":
        """Copy with top-level fields or dotted section fields replaced."""
        top, sections = {}, {}
        for key, value in changes.items():
            if "." in key:
                sec, name = key.split(".", 1)
                sections.setdefault(sec, {})[name] = value
            else:
                top[key] = value
        for sec, vals in sections.items():
            top[sec] = dataclasses.replace(getattr(self, sec), **vals)
        return dataclasses.replace(self, **top)


_LABEL_RE = re.compile(r"^A(\d+)D(\d+)$")


def with_label(config: SystemConfig, label: str) -> SystemConfig:
    """Apply a chiplet-size label such as ``A32D16``."""
    m = _LABEL_RE.match(label)
    if not m:
        raise ConfigError(f"bad chiplet label {label!r}, expected e.g. A32D16")
    return config.replace(**{"acim.pe_per_chiplet": int(m.group(1)),
                             "dcim.pe_per_chiplet": int(m.group(2))})


def acim_capacity(acim: ACIMConfig, weight_bits: int) -> int:
    """Weights one ACIM chiplet can store."""
    cells = acim.pe_per_chiplet * acim.sa_per_pe * acim.sa_rows * acim.sa_cols
    return cells // acim.slices(weight_bits)


def required_acim_chiplets(spec: ViTModelSpec, acim: ACIMConfig) -> int:
    cap = acim_capacity(acim, spec.weight_bits)
    if cap <= 0:
        raise ConfigError([Diagnostic("acim", "zero weight capacity per chiplet")])
    return -(-total_static_weights(spec) // cap)


def dcim_buffer_needed(spec: ViTModelSpec, config: SystemConfig) -> int:
    heads = -(-spec.H // max(config.n_dcim_chiplets, 1))
    return 3 * spec.L * spec.d_head * spec.act_bits // 8 * heads


def validate(config: SystemConfig, spec: Optional[ViTModelSpec] = None) -> list[Diagnostic]:
    """Check every configuration invariant; an empty list means valid."""
    out: list[Diagnostic] = []

    def positive(section: str, obj, names):
        for n in names:
            if not getattr(obj, n) > 0:
                out.append(Diagnostic(f"{section}.{n}", f"must be positive, got {getattr(obj, n)}"))

    a, dc, idp, nop = config.acim, config.dcim, config.idp, config.nop
    positive("acim", a, [f.name for f in dataclasses.fields(a)])
    positive("dcim", dc, [f.name for f in dataclasses.fields(dc)])
    positive("idp", idp, [f.name for f in dataclasses.fields(idp)])
    positive("nop", nop, ["bw"])
    for n in ("t_hop", "e_bit"):
        if getattr(nop, n) < 0:
            out.append(Diagnostic(f"nop.{n}", "must be non-negative"))
    positive("system", config, ["n_dcim_chiplets", "n_idp_chiplets", "block_tokens", "clock_mhz"])
    for sec in ("chiplet_buffer", "local_buffer", "intra_ic"):
        t, e = getattr(config, sec)
        if t < 0 or e < 0:
            out.append(Diagnostic(f"system.{sec}", "costs must be non-negative"))
    if config.n_acim_chiplets < 0:
        out.append(Diagnostic("system.n_acim_chiplets", "must be >= 0 (0 selects automatic sizing)"))
    if nop.mesh_x < 0 or nop.mesh_y < 0 or bool(nop.mesh_x) != bool(nop.mesh_y):
        out.append(Diagnostic("nop.mesh_x", "mesh_x and mesh_y must both be positive or both 0 (auto)"))
    if out:
        return out

    if a.sa_cols % a.group_size:
        out.append(Diagnostic("acim.group_size", f"sa_cols={a.sa_cols} not divisible by group size {a.group_size}"))

    if spec is not None:
        slices = a.slices(spec.weight_bits)
        if a.sa_cols % (slices * a.group_size):
            out.append(Diagnostic(
                "acim.sa_cols",
                f"{a.sa_cols} columns cannot hold whole groups of {a.group_size} "
                f"{slices}-slice weights"))
        n_acim = config.n_acim_chiplets or required_acim_chiplets(spec, a)
        if config.n_acim_chiplets and config.n_acim_chiplets < required_acim_chiplets(spec, a):
            out.append(Diagnostic(
                "system.n_acim_chiplets",
                f"{config.n_acim_chiplets} chiplets hold {config.n_acim_chiplets * acim_capacity(a, spec.weight_bits)}"
                f" weights, model needs {total_static_weights(spec)}"))
        need = dcim_buffer_needed(spec, config)
        if dc.chiplet_buffer_bytes < need:
            out.append(Diagnostic(
                "dcim.chiplet_buffer_bytes",
                f"{dc.chiplet_buffer_bytes} bytes cannot hold Q/K/V of the assigned heads ({need} bytes)"))
        if config.block_tokens > spec.L:
            out.append(Diagnostic("system.block_tokens", f"B_L={config.block_tokens} exceeds L={spec.L}"))
        total = n_acim + config.n_dcim_chiplets + config.n_idp_chiplets
        if nop.mesh_x and nop.mesh_x * nop.mesh_y < total:
            out.append(Diagnostic("nop.mesh_x", f"mesh {nop.mesh_x}x{nop.mesh_y} too small for {total} chiplets"))
    elif nop.mesh_x and nop.mesh_x * nop.mesh_y < config.n_chiplets:
        out.append(Diagnostic("nop.mesh_x", f"mesh {nop.mesh_x}x{nop.mesh_y} too small for {config.n_chiplets} chiplets"))
    return out


# --- serialization ---------------------------------------------------------

_SECTIONS = {"acim": ACIMConfig, "dcim": DCIMConfig, "idp": IDPConfig, "nop": NoPConfig}
_SYSTEM_KEYS = [f.name for f in dataclasses.fields(SystemConfig) if f.name not in _SECTIONS]
_MODEL_KEYS = [f.name for f in dataclasses.fields(ViTModelSpec)]


def config_to_dict(config: SystemConfig, model: Optional[ViTModelSpec] = None) -> dict:
    doc: dict[str, Any] = {}
    if model is not None:
        doc["model"] = dataclasses.asdict(model)
    for sec in _SECTIONS:
        doc[sec] = dataclasses.asdict(getattr(config, sec))
    doc["system"] = {k: list(v) if isinstance(v, tuple) else v
                     for k, v in ((k, getattr(config, k)) for k in _SYSTEM_KEYS)}
    return doc


def _coerce(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError([Diagnostic(path, f"expected a boolean, got {value!r}")])
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError([Diagnostic(path, f"expected an integer, got {value!r}")])
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError([Diagnostic(path, f"expected a number, got {value!r}")])
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(default):
            raise ConfigError([Diagnostic(path, f"expected a [time, energy] pair, got {value!r}")])
        return tuple(float(v) for v in value)
    return value


def _build(cls, data: dict, section: str, defaults):
    diags = [Diagnostic(f"{section}.{k}", "unknown key") for k in data
             if k not in {f.name for f in dataclasses.fields(cls)}]
    if diags:
        raise ConfigError(diags)
    kwargs = {k: _coerce(f"{section}.{k}", v, getattr(defaults, k)) for k, v in data.items()}
    return dataclasses.replace(defaults, **kwargs)


def model_from_dict(data: dict) -> ViTModelSpec:
    unknown = [k for k in data if k not in _MODEL_KEYS]
    if unknown:
        raise ConfigError([Diagnostic(f"model.{k}", "unknown key") for k in unknown])
    if data.get("name") in MODELS:
        # a known model name with optional field overrides
        return dataclasses.replace(MODELS[data["name"]], **data)
    if set(data) == {"name"}:
        return get_model(data["name"])
    return ViTModelSpec(**data)


def config_from_dict(doc: dict) -> tuple[SystemConfig, Optional[ViTModelSpec]]:
    unknown = [k for k in doc if k not in (*_SECTIONS, "system", "model")]
    if unknown:
        raise ConfigError([Diagnostic(k, "unknown section") for k in unknown])
    base = SystemConfig()
    kwargs = {}
    for sec, cls in _SECTIONS.items():
        if sec in doc:
            kwargs[sec] = _build(cls, doc[sec], sec, getattr(base, sec))
    system = doc.get("system", {})
    bad = [Diagnostic(f"system.{k}", "unknown key") for k in system if k not in _SYSTEM_KEYS]
    if bad:
        raise ConfigError(bad)
    for k, v in system.items():
        kwargs[k] = _coerce(f"system.{k}", v, getattr(base, k))
    model = model_from_dict(doc["model"]) if "model" in doc else None
    return dataclasses.replace(base, **kwargs), model


def loads(text: str, fmt: str = "toml") -> tuple[SystemConfig, Optional[ViTModelSpec]]:
    doc = json.loads(text) if fmt == "json" else tomllib.loads(text)
    return config_from_dict(doc)


def dumps(config: SystemConfig, model: Optional[ViTModelSpec] = None, fmt: str = "toml") -> str:
    doc = config_to_dict(config, model)
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True)
    return tomli_w.dumps(doc)


def load_config(path: Union[str, Path, None] = None) -> tuple[SystemConfig, Optional[ViTModelSpec]]:
    """Load a TOML or JSON config; defaults to $HEMLET_REF_CONFIG or reference.toml."""
    if path is None:
        path = os.environ.get(REF_CONFIG_ENV) or REFERENCE_CONFIG
    path = Path(path)
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    try:
        return loads(path.read_text(), fmt)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError([Diagnostic(str(path), f"parse error: {exc}")]) from exc
