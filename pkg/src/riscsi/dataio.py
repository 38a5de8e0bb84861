"""
``RISD`` stage-dataset files and on-disk pipeline models.

RISD layout (little-endian)::

    b"RISD"                 magic
    u16 version             currently 1
    u8  stage               0 = DE, 1 = ARE, 2 = IRP
    u8  reserved            0
    u32 n                   number of samples
    u8  k_in, u32[k_in]     per-sample input dims
    u8  k_lab, u32[k_lab]   per-sample label dims
    f32[n * prod(in)]       inputs, row-major
    f32[n * prod(lab)]      labels, row-major

A sidecar ``<file>.json`` holds the provenance record (seed, SNR, split,
active indices, upstream checkpoint ids, IRP row choices).

A pipeline model directory contains ``de.rckp``, ``are.rckp``, ``irp.rckp``
(absent when every element is active) and ``model.json`` with the active
set, training SNR, config hash and the SHA-256 of each checkpoint file.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .nn import FormatError, load_checkpoint, save_checkpoint
from .pilot import ActiveSet
from .pipeline import STAGES, PipelineModel, StageDataset

MAGIC = b"RISD"
VERSION = 1
_F32 = np.dtype("<f4")


def dataset_to_bytes(ds: StageDataset) -> bytes:
    n = len(ds)
    in_dims, lab_dims = ds.inputs.shape[1:], ds.labels.shape[1:]
    head = bytearray(MAGIC)
    head += struct.pack("<HBBI", VERSION, STAGES.index(ds.stage), 0, n)
    head += struct.pack("<B", len(in_dims)) + struct.pack(f"<{len(in_dims)}I", *in_dims)
    head += struct.pack("<B", len(lab_dims)) + struct.pack(f"<{len(lab_dims)}I", *lab_dims)
    return (bytes(head) + np.ascontiguousarray(ds.inputs, _F32).tobytes()
            + np.ascontiguousarray(ds.labels, _F32).tobytes())


def dataset_from_bytes(data: bytes, provenance: dict | None = None) -> StageDataset:
    if data[:4] != MAGIC:
        raise FormatError("not an RISD dataset (bad magic)")
    version, stage, _, n = struct.unpack_from("<HBBI", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported RISD version {version}")
    if stage >= len(STAGES):
        raise FormatError(f"unknown stage tag {stage}")
    off = 12
    dims = []
    for _ in range(2):
        (k,) = struct.unpack_from("<B", data, off)
        off += 1
        dims.append(struct.unpack_from(f"<{k}I", data, off))
        off += 4 * k
    arrays = []
    for d in dims:
        count = n * int(np.prod(d))
        if off + 4 * count > len(data):
            raise FormatError("truncated RISD file")
        arrays.append(np.frombuffer(data, _F32, count, off).reshape((n,) + tuple(d)).astype(np.float32))
        off += 4 * count
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes in RISD file")
    return StageDataset(STAGES[stage], arrays[0], arrays[1], provenance or {})


def save_dataset(ds: StageDataset, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = dataset_to_bytes(ds)
    path.write_bytes(data)
    digest = hashlib.sha256(data).hexdigest()
    meta = dict(ds.provenance, sha256=digest)
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return digest


def load_dataset(path) -> StageDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    meta_path = Path(str(path) + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    meta.pop("sha256", None)
    return dataset_from_bytes(path.read_bytes(), meta)


def save_model(model: PipelineModel, directory) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for stage in STAGES:
        ckpt = getattr(model, stage.lower())
        if ckpt is not None:
            hashes[stage] = save_checkpoint(ckpt, directory / f"{stage.lower()}.rckp")
    snr = model.train_snr_db
    meta = {
        "active": list(model.active.indices),
        "num_ris": model.active.num_elements,
        "train_snr_db": snr if np.isscalar(snr) else list(snr),
        "config_hash": model.config_hash,
        "checkpoints": hashes,
    }
    (directory / "model.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return hashes


def load_model(directory, partial: bool = False) -> PipelineModel:
    """
    Load a model directory written by :func:`save_model`.

    With ``partial`` the stages present on disk are loaded and missing ones
    left empty; otherwise every stage the active set needs must exist.
    """
    directory = Path(directory)
    meta_path = directory / "model.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"model metadata not found: {meta_path}")
    meta = json.loads(meta_path.read_text())
    active = ActiveSet(tuple(meta["active"]), meta["num_ris"])
    snr = meta["train_snr_db"]
    model = PipelineModel(active, train_snr_db=snr if np.isscalar(snr) else tuple(snr),
                          config_hash=meta.get("config_hash", ""))
    needed = ["DE", "ARE"] + (["IRP"] if active.n2 else [])
    for stage in needed:
        model_path = directory / f"{stage.lower()}.rckp"
        if not model_path.exists():
            if partial:
                continue
            raise FileNotFoundError(f"checkpoint not found: {model_path}")
        setattr(model, stage.lower(), load_checkpoint(model_path))
    return model
