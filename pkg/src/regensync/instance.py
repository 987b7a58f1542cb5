"""Whole instance documents: network, parameters and the initial timetable."""
from __future__ import annotations

import json
from importlib import resources
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Union

from .network import InstanceError, ModelParams, RailNetwork, load_network, network_to_dict, parse_document
from .timetable import Timetable

TOP_LEVEL_KEYS = (
    "stations", "platforms", "tracks", "crossing_overs", "trains", "omega",
    "connections", "turnarounds", "headways", "params", "initial_timetable",
)


@dataclass
class Instance:
    network: RailNetwork
    params: ModelParams
    initial: Timetable


def _timetable(records: Any) -> Timetable:
    if not isinstance(records, list):
        raise InstanceError("expected a list of event records", "initial_timetable")
    for k, rec in enumerate(records):
        for key in ("train_id", "platform_id", "arrival_s", "departure_s"):
            if not isinstance(rec, Mapping) or key not in rec:
                raise InstanceError(f"missing key {key!r}", f"initial_timetable[{k}]")
    try:
        return Timetable.from_records(records)
    except (TypeError, ValueError) as exc:
        raise InstanceError(str(exc), "initial_timetable") from None


def load_instance(source: Union[str, Path, Mapping[str, Any]]) -> Instance:
    """Load from a path, a JSON string or a decoded mapping."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        source = Path(source).read_text()
    doc = parse_document(source) if isinstance(source, str) else source
    net, params = load_network(doc)
    tt = _timetable(doc.get("initial_timetable", []))
    for train, platform in tt.keys():
        if train not in net.trains:
            raise InstanceError(f"unknown train {train!r}", "initial_timetable")
        if platform not in net.trains[train].path:
            raise InstanceError(f"train {train!r} does not visit {platform!r}", "initial_timetable")
    return Instance(net, params, tt)


def _compact(v: Any) -> Any:
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if isinstance(v, list):
        return [_compact(x) for x in v]
    if isinstance(v, dict):
        return {k: _compact(x) for k, x in v.items()}
    return v


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    doc = network_to_dict(inst.network, inst.params)
    doc["initial_timetable"] = inst.initial.to_records()
    return _compact({k: doc[k] for k in TOP_LEVEL_KEYS})


def dumps(doc: Mapping[str, Any]) -> str:
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def fixture_path(name: str) -> Path:
    path = Path(str(resources.files("regensync") / "data" / f"{name}.json"))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture {name!r}")
    return path


def load_fixture(name: str) -> Instance:
    return load_instance(fixture_path(name))
