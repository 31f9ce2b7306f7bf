"""Campaign spec files (TOML).

Two forms are accepted. An explicit campaign lists the workload and its faults::

    seed = 7
    n_faultfree = 20
    n_per_fault = 25

    [workload]
    name = "boot-vm"
    alphabet_size = 8
    backbone = [0, 1, 2, 3, 4, 5]
    idle_types = [7]
    vocabulary = [["nova-api", "create", "200"], ...]   # optional

    [workload.noise]
    swap_prob = 0.1
    optional_event_prob = 0.3
    optional_events = [[2, 6]]        # [backbone position, symbol]
    swap_positions = [1, 2, 3]        # optional, default all
    idle_event_prob = 0.05

    [[faults]]
    mode = "disk-error"
    edits = [{op = "insert", position = 3, symbol = 6}, {op = "delete", position = 4}]

A random campaign draws both from a seed::

    seed = 3
    [random]
    n_modes = 4
    edits_per_mode = [3, 6]
    noise = "calibrated"              # or "none"
    backbone_length = 200             # any other random_workload keyword
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .simulator import (
    CALIBRATED_NOISE,
    CampaignSpec,
    Edit,
    FaultSpec,
    Noise,
    SpecError,
    WorkloadSpec,
    random_campaign,
)

_TOP_KEYS = {"seed", "n_faultfree", "n_per_fault", "n_idle", "workload", "faults", "random"}
_NOISE_PRESETS = {"none": {}, "calibrated": CALIBRATED_NOISE}


def _reject_unknown(table: Mapping, allowed: set[str], where: str) -> None:
    extra = set(table) - allowed
    if extra:
        raise SpecError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


def _explicit(data: Mapping[str, Any], seed: int) -> tuple[WorkloadSpec, list[FaultSpec]]:
    wl = dict(data["workload"])
    _reject_unknown(wl, {"name", "alphabet_size", "backbone", "idle_types", "vocabulary", "noise", "idle_trace_length"}, "[workload]")
    noise_tab = dict(wl.pop("noise", {}))
    _reject_unknown(noise_tab, {"swap_prob", "optional_event_prob", "optional_events", "swap_positions", "idle_event_prob"}, "[workload.noise]")
    try:
        workload = WorkloadSpec(noise=Noise(**noise_tab), seed=seed, **wl)
    except TypeError as exc:
        raise SpecError(f"bad [workload] table: {exc}") from exc
    faults = []
    for i, f in enumerate(data.get("faults", [])):
        if "mode" not in f or "edits" not in f:
            raise SpecError(f"fault #{i} needs 'mode' and 'edits'")
        edits = []
        for e in f["edits"]:
            _reject_unknown(e, {"op", "position", "symbol"}, f"fault {f['mode']!r} edit")
            edits.append(Edit(e["op"], int(e["position"]), e.get("symbol")))
        faults.append(FaultSpec(str(f["mode"]), tuple(edits)))
    return workload, faults


def campaign_from_dict(data: Mapping[str, Any], seed: int | None = None) -> CampaignSpec:
    """Build a CampaignSpec; ``seed`` (if given) overrides the file's seed."""
    _reject_unknown(data, _TOP_KEYS, "campaign spec")
    seed = int(data.get("seed", 0) if seed is None else seed)
    counts = {k: int(data[k]) for k in ("n_faultfree", "n_per_fault", "n_idle") if k in data}
    if "random" in data:
        if "workload" in data or "faults" in data:
            raise SpecError("use either [random] or [workload]/[[faults]], not both")
        rnd = dict(data["random"])
        preset = rnd.pop("noise", "none")
        if preset not in _NOISE_PRESETS:
            raise SpecError(f"unknown noise preset {preset!r}; expected one of {sorted(_NOISE_PRESETS)}")
        kw = {**_NOISE_PRESETS[preset], **rnd}
        if "edits_per_mode" in kw:
            kw["edits_per_mode"] = tuple(kw["edits_per_mode"])
        n_idle = counts.pop("n_idle", 1)
        try:
            camp = random_campaign(seed, **counts, **kw)
        except TypeError as exc:
            raise SpecError(f"bad [random] table: {exc}") from exc
        camp.n_idle = n_idle
        return camp
    if "workload" not in data:
        raise SpecError("campaign spec needs a [workload] table or a [random] table")
    workload, faults = _explicit(data, seed)
    if not faults:
        raise SpecError("campaign spec defines no [[faults]]")
    for f in faults:
        f.validate(workload)
    return CampaignSpec(workload, faults, **counts)


def load_campaign_spec(path: Path | str, seed: int | None = None) -> CampaignSpec:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from exc
    return campaign_from_dict(data, seed)
