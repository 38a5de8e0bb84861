import json
import struct

import numpy as np
import pytest

from riscsi.dataio import dataset_from_bytes, dataset_to_bytes, load_dataset, load_model, save_dataset, save_model
from riscsi.nn import FormatError, are_dnn_spec, de_dnn_spec, init_checkpoint, irp_dnn_spec, to_bytes
from riscsi.numerics import RngStream
from riscsi.pilot import ActiveSet
from riscsi.pipeline import PipelineModel, StageDataset


@pytest.fixture
def dataset():
    gen = np.random.default_rng(0)
    return StageDataset("ARE", gen.standard_normal((5, 3, 2, 2)).astype(np.float32),
                        gen.standard_normal((5, 3, 2, 2)).astype(np.float32), {"seed": 4, "snr_db": 10.0})


def test_bytes_roundtrip(dataset):
    blob = dataset_to_bytes(dataset)
    assert blob[:4] == b"RISD"
    assert struct.unpack_from("<HBBI", blob, 4) == (1, 1, 0, 5)
    back = dataset_from_bytes(blob)
    assert back.stage == "ARE"
    assert np.array_equal(back.inputs, dataset.inputs)
    assert np.array_equal(back.labels, dataset.labels)
    assert dataset_to_bytes(back) == blob


def test_file_roundtrip_with_sidecar(tmp_path, dataset):
    path = tmp_path / "sub" / "are.risd"
    digest = save_dataset(dataset, path)
    meta = json.loads((tmp_path / "sub" / "are.risd.json").read_text())
    assert meta["sha256"] == digest and meta["seed"] == 4
    back = load_dataset(path)
    assert back.provenance == {"seed": 4, "snr_db": 10.0}
    assert np.array_equal(back.inputs, dataset.inputs)


def test_corruptions(dataset):
    blob = dataset_to_bytes(dataset)
    with pytest.raises(FormatError):
        dataset_from_bytes(b"RCKP" + blob[4:])
    with pytest.raises(FormatError):
        dataset_from_bytes(blob[:-1])
    with pytest.raises(FormatError):
        dataset_from_bytes(blob + b"\0" * 4)
    with pytest.raises(FormatError):
        dataset_from_bytes(blob[:6] + bytes([7]) + blob[7:])


def test_missing_dataset(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope.risd")


def _model(active):
    m = 3
    model = PipelineModel(active, init_checkpoint(de_dnn_spec(m, (4,)), RngStream(0)),
                          init_checkpoint(are_dnn_spec(m, active.n1, 2, 1), RngStream(1)),
                          train_snr_db=(5.0, 15.0), config_hash="abc")
    if active.n2:
        model.irp = init_checkpoint(irp_dnn_spec(active.n1, active.n2, (4,)), RngStream(2))
    return model


def test_model_roundtrip(tmp_path):
    model = _model(ActiveSet.evenly_spaced(8, 2))
    hashes = save_model(model, tmp_path / "m")
    assert set(hashes) == {"DE", "ARE", "IRP"}
    back = load_model(tmp_path / "m")
    assert back.active == model.active
    assert back.train_snr_db == (5.0, 15.0) and back.config_hash == "abc"
    for s in ("de", "are", "irp"):
        assert to_bytes(getattr(back, s)) == to_bytes(getattr(model, s))


def test_full_activation_model_has_no_irp(tmp_path):
    save_model(_model(ActiveSet.evenly_spaced(4, 4)), tmp_path / "m")
    assert not (tmp_path / "m" / "irp.rckp").exists()
    assert load_model(tmp_path / "m").irp is None


def test_missing_checkpoint_is_named(tmp_path):
    save_model(_model(ActiveSet.evenly_spaced(8, 2)), tmp_path / "m")
    (tmp_path / "m" / "are.rckp").unlink()
    with pytest.raises(FileNotFoundError, match="are.rckp"):
        load_model(tmp_path / "m")
    partial = load_model(tmp_path / "m", partial=True)
    assert partial.are is None and partial.de is not None
    with pytest.raises(FileNotFoundError, match="model.json"):
        load_model(tmp_path / "other")
