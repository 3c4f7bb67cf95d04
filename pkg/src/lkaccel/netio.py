"""Strict JSON encoding of networks."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .errors import SchemaError, SimError
from .netmodel import (Activation, BlockKind, BlockSpec, LayerKind, LayerSpec, NetworkSpec)

LAYER_KEYS = ("kind", "nix", "niy", "nif", "nof", "nkx", "nky", "stride", "pad",
              "group_num", "activation", "requant_shift")
_INT_KEYS = LAYER_KEYS[1:10] + ("requant_shift",)
TOP_KEYS = {"name", "items", "provenance"}


def _check_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise SchemaError(f"{where}: unknown key {unknown[0]!r}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaError(f"{where}: missing key {missing[0]!r}")


def _enum(cls, value, where):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise SchemaError(f"{where}: {value!r} is not one of {choices}") from None


def layer_from_dict(d: dict, where: str = "layer") -> LayerSpec:
    _check_keys(d, LAYER_KEYS, LAYER_KEYS, where)
    for k in _INT_KEYS:
        if not isinstance(d[k], int) or isinstance(d[k], bool):
            raise SchemaError(f"{where}.{k}: expected an integer, got {d[k]!r}")
    try:
        return LayerSpec(kind=_enum(LayerKind, d["kind"], f"{where}.kind"),
                         activation=_enum(Activation, d["activation"], f"{where}.activation"),
                         **{k: d[k] for k in _INT_KEYS})
    except SchemaError:
        raise
    except (SimError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def layer_to_dict(layer: LayerSpec) -> dict:
    d = {k: getattr(layer, k) for k in LAYER_KEYS}
    d["kind"] = layer.kind.value
    d["activation"] = layer.activation.value
    return d


def block_from_dict(d: dict, where: str = "block") -> BlockSpec:
    kind = _enum(BlockKind, d.get("block_kind"), f"{where}.block_kind")
    list_key = "layers" if kind is BlockKind.BYPASS_BRANCH else "branches"
    allowed = ("block_kind", list_key, "shortcut")
    _check_keys(d, allowed, ("block_kind", list_key), where)
    entries = d[list_key]
    if not isinstance(entries, list) or not entries:
        raise SchemaError(f"{where}.{list_key}: expected a non-empty list")
    shortcut = d.get("shortcut", False)
    if not isinstance(shortcut, bool):
        raise SchemaError(f"{where}.shortcut: expected a boolean")
    layers = [layer_from_dict(e, f"{where}.{list_key}[{i}]") for i, e in enumerate(entries)]
    try:
        return BlockSpec(kind, tuple(layers), shortcut)
    except SimError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def block_to_dict(block: BlockSpec) -> dict:
    key = "layers" if block.kind is BlockKind.BYPASS_BRANCH else "branches"
    return {"block_kind": block.kind.value, key: [layer_to_dict(l) for l in block.layers],
            "shortcut": block.shortcut}


def network_from_dict(d: dict) -> NetworkSpec:
    _check_keys(d, TOP_KEYS, ("name", "items"), "network")
    if not isinstance(d["name"], str):
        raise SchemaError("network.name: expected a string")
    if not isinstance(d["items"], list):
        raise SchemaError("network.items: expected a list")
    prov = d.get("provenance", "")
    if not isinstance(prov, str):
        raise SchemaError("network.provenance: expected a string")
    items = []
    for i, it in enumerate(d["items"]):
        where = f"items[{i}]"
        if isinstance(it, dict) and "block_kind" in it:
            items.append(block_from_dict(it, where))
        else:
            items.append(layer_from_dict(it, where))
    try:
        return NetworkSpec(d["name"], tuple(items), prov)
    except SimError as exc:
        raise SchemaError(f"network: {exc}") from exc


def network_to_dict(net: NetworkSpec) -> dict:
    d = {"name": net.name}
    if net.provenance:
        d["provenance"] = net.provenance
    d["items"] = [layer_to_dict(it) if isinstance(it, LayerSpec) else block_to_dict(it)
                  for it in net.items]
    return d


def loads_network(text: str) -> NetworkSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return network_from_dict(data)


def dumps_network(net: NetworkSpec) -> str:
    return json.dumps(network_to_dict(net), indent=1) + "\n"


def load_network(path: str | Path) -> NetworkSpec:
    return loads_network(Path(path).read_text(encoding="utf-8"))


def builtin_names() -> list[str]:
    root = resources.files("lkaccel") / "networks"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_builtin(name: str) -> NetworkSpec:
    res = resources.files("lkaccel") / "networks" / f"{name}.json"
    if not res.is_file():
        raise SchemaError(f"unknown builtin network {name!r}; choose from {', '.join(builtin_names())}")
    return loads_network(res.read_text(encoding="utf-8"))
