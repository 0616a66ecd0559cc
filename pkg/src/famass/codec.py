"""Dataclass <-> JSON tree conversion used by the canonical dumps.

Conversion is driven by the dataclass type hints, so a loaded tree comes
back as the same frozen dataclasses (tuples, enums and all) it was dumped
from. Fields declared with ``compare=False`` are not part of a model's
identity and are skipped.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import typing
from enum import Enum
from functools import lru_cache
from typing import Any, Union

from famass.analysis import Distribution


def to_tree(obj: Any) -> Any:
    if isinstance(obj, Distribution):
        return {"distribution": obj.kind, "params": list(obj.params)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: to_tree(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
            if f.compare
        }
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [to_tree(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): to_tree(v) for k, v in obj.items()}
    return obj


@lru_cache(maxsize=None)
def _hints(cls) -> dict[str, Any]:
    module = sys.modules[cls.__module__]
    return typing.get_type_hints(cls, vars(module))


def from_tree(tp: Any, data: Any) -> Any:
    if data is None:
        return None
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if tp is Any:
        return data
    if origin is Union:
        if isinstance(data, dict) and "distribution" in data:
            return Distribution(data["distribution"], tuple(data["params"]))
        non_none = [a for a in args if a is not type(None)]
        if len(non_none) == 1:
            return from_tree(non_none[0], data)
        for a in non_none:
            if dataclasses.is_dataclass(a) and isinstance(data, dict):
                return from_tree(a, data)
            if isinstance(a, type) and issubclass(a, Enum):
                try:
                    return a(data)
                except ValueError:
                    continue
        return data
    if origin in (tuple, typing.Tuple):
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(from_tree(args[0], x) for x in data)
        return tuple(from_tree(a, x) for a, x in zip(args, data))
    if origin in (list,):
        return [from_tree(args[0], x) for x in data]
    if origin in (dict,):
        return {k: from_tree(args[1], v) for k, v in data.items()}
    if tp is Distribution:
        return Distribution(data["distribution"], tuple(data["params"]))
    if dataclasses.is_dataclass(tp):
        hints = _hints(tp)
        kwargs = {
            f.name: from_tree(hints[f.name], data[f.name])
            for f in dataclasses.fields(tp)
            if f.compare and f.name in data
        }
        return tp(**kwargs)
    if isinstance(tp, type) and issubclass(tp, Enum):
        return tp(data)
    return data


def canonical_json(tree: Any) -> str:
    return json.dumps(tree, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
