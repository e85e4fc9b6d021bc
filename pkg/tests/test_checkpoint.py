from __future__ import annotations

import struct

import pytest
import torch

from src.encoder import KgcModel
from src.errors import CheckpointError
from src.parsers import CheckpointParser, load_checkpoint, save_checkpoint, store_vocab_digest
from src.parsers.checkpoint_parser import BYTE_ORDER_MARK, HEAD_FORMAT
from tests.helpers import toy_store


def _assert_same_model(a: KgcModel, b: KgcModel):
    assert a.hyperparams() == b.hyperparams()
    sa, sb = a.state_dict(), b.state_dict()
    assert sa.keys() == sb.keys()
    for key in sa:
        assert torch.equal(sa[key], sb[key]), key


@pytest.mark.parametrize("with_align,dtype", [(False, "float64"), (True, "float32")])
def test_round_trip(tmp_path, with_align, dtype):
    model = KgcModel(7, 3, dim=5, layers=2, with_align=with_align, dtype=dtype, seed=4, name="en",
                     score_fn="distmult")
    path = save_checkpoint(model, tmp_path / "en.ckpt", kg_name="en", digest="abc")
    _assert_same_model(model, load_checkpoint(path, expected_digest="abc"))


def test_header_declares_byte_order(tmp_path):
    path = save_checkpoint(KgcModel(3, 1, dim=2), tmp_path / "m.ckpt")
    data = path.read_bytes()
    size, label = struct.unpack_from("<I4s", data, 0)
    assert label == b"HEAD"
    fields = struct.unpack_from(HEAD_FORMAT, data, 8)
    assert fields[1] == BYTE_ORDER_MARK
    assert fields[5:8] == (3, 1, 2)
    checkpoint = CheckpointParser().parse(path)
    assert checkpoint.meta["hyperparams"]["num_entities"] == 3


def test_vocabulary_digest_mismatch(tmp_path):
    store = toy_store()
    path = save_checkpoint(KgcModel(6, 2, dim=2), tmp_path / "en.ckpt", kg_name="en",
                           digest=store_vocab_digest(store, "en"))
    load_checkpoint(path, store_vocab_digest(store, "en"))
    store.kgs[0].entity_names[0] = "renamed"
    with pytest.raises(CheckpointError):
        load_checkpoint(path, store_vocab_digest(store, "en"))


def test_truncated_file(tmp_path):
    path = save_checkpoint(KgcModel(4, 2, dim=3), tmp_path / "m.ckpt")
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_wrong_byte_order_mark(tmp_path):
    path = save_checkpoint(KgcModel(4, 2, dim=3), tmp_path / "m.ckpt")
    data = bytearray(path.read_bytes())
    struct.pack_into("<I", data, 12, 0x04030201)
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="字节序"):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.ckpt")
