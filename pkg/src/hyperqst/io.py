"""File formats: protocol lists, count tables, ensembles, reports and plot tables."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .apparatus import EomSetting, MeasurementSetting, PolProjectorSetting, ShaperMask
from .linalg import SubsystemLayout
from .simulator import CountRecord, Dataset
from .tomography import PosteriorEnsemble


def setting_to_dict(s: MeasurementSetting) -> dict:
    return {
        "label": s.label,
        "pol": str(s.pol),
        "idler_phases": list(s.mask.idler_phases),
        "signal_phases": list(s.mask.signal_phases),
        "idler_eom": [s.idler_eom.depth, s.idler_eom.rf_phase],
        "signal_eom": [s.signal_eom.depth, s.signal_eom.rf_phase],
        "out_bins": list(s.out_bins),
    }


def setting_from_dict(raw: dict) -> MeasurementSetting:
    try:
        return MeasurementSetting(
            PolProjectorSetting.parse(raw["pol"]),
            ShaperMask(tuple(raw["idler_phases"]), tuple(raw["signal_phases"])),
            EomSetting(*raw["idler_eom"]),
            EomSetting(*raw["signal_eom"]),
            tuple(raw["out_bins"]),
            raw.get("label", ""),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed protocol entry {raw!r}: {exc}") from exc


def dumps_protocol(settings: list[MeasurementSetting]) -> str:
    return json.dumps([setting_to_dict(s) for s in settings], indent=1) + "\n"


def load_protocol(path: str | Path) -> list[MeasurementSetting]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list) or not raw:
        raise ValueError(f"{path}: protocol file must hold a nonempty list of settings")
    return [setting_from_dict(r) for r in raw]


def dumps_dataset(ds: Dataset) -> str:
    buf = io.StringIO()
    meta = {"protocol_id": ds.protocol_id, "d": ds.d, **ds.metadata}
    for key in sorted(meta):
        buf.write(f"# {key}={json.dumps(meta[key])}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "counts", "duration"])
    for r in ds.records:
        writer.writerow([r.setting_label, r.counts, repr(float(r.duration))])
    return buf.getvalue()


def loads_dataset(text: str) -> Dataset:
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise ValueError(f"metadata line without '=': {line!r}")
            try:
                meta[key.strip()] = json.loads(value)
            except json.JSONDecodeError:
                meta[key.strip()] = value
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or rows[0] != ["label", "counts", "duration"]:
        raise ValueError("dataset needs a 'label,counts,duration' header row")
    records = []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != 3:
            raise ValueError(f"dataset row {i} has {len(row)} fields")
        try:
            records.append(CountRecord(row[0], int(row[1]), float(row[2])))
        except ValueError as exc:
            raise ValueError(f"dataset row {i}: {exc}") from exc
    protocol_id = str(meta.pop("protocol_id", "custom"))
    d = int(meta.pop("d", 2))
    return Dataset(records, protocol_id, d, meta)


def load_dataset(path: str | Path) -> Dataset:
    return loads_dataset(Path(path).read_text())


def basis_labels(layout: SubsystemLayout) -> list[str]:
    """Labels like 'H H I0 S1' in row-major order of the layout."""
    names = {"pol-idler": lambda k: "HV"[k], "pol-signal": lambda k: "HV"[k],
             "freq-idler": lambda k: f"I{k}", "freq-signal": lambda k: f"S{k}"}
    labels = []
    for idx in np.ndindex(*layout.dims):
        labels.append(" ".join(names[r](k) for r, k in zip(layout.roles, idx)))
    return labels


def matrix_block(m: np.ndarray, layout: SubsystemLayout) -> dict:
    return {"basis": basis_labels(layout), "real": m.real.tolist(), "imag": m.imag.tolist()}


def matrix_from_block(block: dict) -> np.ndarray:
    return np.asarray(block["real"], dtype=float) + 1j * np.asarray(block["imag"], dtype=float)


def plot_table(m: np.ndarray, layout: SubsystemLayout) -> str:
    """Long-format table for 3D bar plots of a density matrix."""
    labels = basis_labels(layout)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "col", "real", "imag"])
    for i, j in np.ndindex(*m.shape):
        writer.writerow([labels[i], labels[j], repr(float(m[i, j].real)), repr(float(m[i, j].imag))])
    return buf.getvalue()


def save_ensemble(path: str | Path, ens: PosteriorEnsemble, summary: dict | None = None) -> None:
    np.savez_compressed(
        path, real=ens.samples.real, imag=ens.samples.imag, dims=np.array(ens.layout.dims),
        roles=np.array(ens.layout.roles), acceptance_rate=ens.acceptance_rate, step_beta=ens.step_beta,
        acceptance_trace=ens.acceptance_trace, loglik_trace=ens.loglik_trace,
        summary=json.dumps(summary or {}, sort_keys=True))


def load_ensemble(path: str | Path) -> tuple[PosteriorEnsemble, dict]:
    with np.load(path) as z:
        layout = SubsystemLayout(tuple(int(x) for x in z["dims"]), tuple(str(r) for r in z["roles"]))
        ens = PosteriorEnsemble(layout, z["real"] + 1j * z["imag"], float(z["acceptance_rate"]),
                                float(z["step_beta"]), z["acceptance_trace"], z["loglik_trace"])
        return ens, json.loads(str(z["summary"]))


def acceptance_table(ens: PosteriorEnsemble) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample", "acceptance", "loglik"])
    for i, (a, ll) in enumerate(zip(ens.acceptance_trace, ens.loglik_trace)):
        writer.writerow([i, repr(float(a)), repr(float(ll))])
    return buf.getvalue()


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
