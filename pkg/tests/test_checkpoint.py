"""Checkpoint container round trips and damage detection."""
import json

import numpy as np
import pytest

from eegraph.checkpoint import (
    Checkpoint,
    load_checkpoint,
    read_array_block,
    save_checkpoint,
    write_array_block,
)
from eegraph.errors import CorruptBundleError
from eegraph.graph import SymmetricAdjacency
from eegraph.model import init_params
from eegraph.optim import AdamConfig, AdamState, adam_step
from eegraph.params import GradientSet, ModelConfig

CFG = ModelConfig(n_channels=5, in_dim=3, hidden_dim=4, n_classes=3, steps=2)


def sample_ckpt(seed=0, domain_head=True, optimizer=True):
    rng = np.random.default_rng(seed)
    full = rng.uniform(0.2, 1.0, size=(5, 5))
    full = (full + full.T) / 2
    np.fill_diagonal(full, 1.0)
    params = init_params(
        CFG, None, seed, domain_head=domain_head, adj=SymmetricAdjacency.from_full(full)
    )
    state = None
    if optimizer:
        state = AdamState.for_params(params, AdamConfig(lr=0.02, weight_decay=0.1))
        g = GradientSet.zeros_like(params)
        for arr in g.tensors().values():
            arr += rng.normal(size=arr.shape)
        adam_step(state, params, g)
        adam_step(state, params, g)
    return Checkpoint(
        cfg=CFG,
        params=params,
        optimizer=state,
        channel_names=[f"E{i}" for i in range(5)],
        global_pairs=[("E0", "E4")],
    )


def test_array_block_round_trip():
    rng = np.random.default_rng(1)
    for shape in [(3,), (2, 4), (2, 3, 2)]:
        arr = rng.normal(size=shape)
        buf = write_array_block(arr)
        back, off = read_array_block(buf, 0, "x")
        assert off == len(buf)
        assert np.array_equal(back, arr)


def test_array_block_truncation():
    buf = write_array_block(np.ones((3, 3)))
    with pytest.raises(CorruptBundleError):
        read_array_block(buf[:-8], 0, "x")
    with pytest.raises(CorruptBundleError):
        read_array_block(buf[:6], 0, "x")
    with pytest.raises(CorruptBundleError):
        read_array_block(b"", 0, "x")


def test_array_block_absurd_rank():
    import struct

    with pytest.raises(CorruptBundleError):
        read_array_block(struct.pack("<I", 40) + b"\x00" * 160, 0, "x")


def test_round_trip_minimal(tmp_path):
    ck = sample_ckpt(domain_head=False, optimizer=False)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, ck)
    back = load_checkpoint(path)
    assert back.cfg == ck.cfg
    assert np.array_equal(back.params.adj.upper, ck.params.adj.upper)
    assert np.array_equal(back.params.w_feat, ck.params.w_feat)
    assert np.array_equal(back.params.w_class, ck.params.w_class)
    assert back.params.w_dom is None
    assert back.optimizer is None


def test_round_trip_full(tmp_path):
    ck = sample_ckpt()
    path = tmp_path / "f.ckpt"
    save_checkpoint(path, ck)
    back = load_checkpoint(path)
    assert np.array_equal(back.params.w_dom, ck.params.w_dom)
    assert back.channel_names == ck.channel_names
    assert back.global_pairs == [("E0", "E4")]
    opt = back.optimizer
    assert opt.t == 2
    assert opt.cfg == ck.optimizer.cfg
    for name in ("adj", "w_feat", "w_class", "w_dom"):
        assert np.array_equal(opt.m[name], ck.optimizer.m[name])
        assert np.array_equal(opt.v[name], ck.optimizer.v[name])


def test_save_is_byte_deterministic(tmp_path):
    ck = sample_ckpt()
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, ck)
    save_checkpoint(b, ck)
    assert a.read_bytes() == b.read_bytes()


def test_reload_resaves_identically(tmp_path):
    ck = sample_ckpt()
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, ck)
    save_checkpoint(b, load_checkpoint(a))
    assert a.read_bytes() == b.read_bytes()


def test_header_is_one_json_line(tmp_path):
    path = tmp_path / "h.ckpt"
    save_checkpoint(path, sample_ckpt(optimizer=False))
    head = path.read_bytes().split(b"\n", 1)[0]
    doc = json.loads(head)
    assert doc["format"] == "eegraph-checkpoint"
    assert doc["version"] == 1
    assert doc["model"]["n_channels"] == 5
    assert doc["has_domain_head"] is True
    assert doc["optimizer"] is None


def test_missing_file(tmp_path):
    with pytest.raises(CorruptBundleError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_not_a_checkpoint(tmp_path):
    p = tmp_path / "junk"
    p.write_bytes(b"\x00\x01\x02 definitely not a header")
    with pytest.raises(CorruptBundleError):
        load_checkpoint(p)
    p.write_bytes(json.dumps({"format": "something-else"}).encode() + b"\n")
    with pytest.raises(CorruptBundleError):
        load_checkpoint(p)


def test_unsupported_version(tmp_path):
    path = tmp_path / "v.ckpt"
    save_checkpoint(path, sample_ckpt(optimizer=False))
    head, body = path.read_bytes().split(b"\n", 1)
    doc = json.loads(head)
    doc["version"] = 99
    path.write_bytes(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode() + b"\n" + body)
    with pytest.raises(CorruptBundleError):
        load_checkpoint(path)


def test_truncation_everywhere(tmp_path):
    # chopping the file at any block boundary region must be caught
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, sample_ckpt())
    blob = path.read_bytes()
    nl = blob.find(b"\n")
    for cut in (nl + 3, nl + 30, len(blob) // 2, len(blob) - 5):
        path.write_bytes(blob[:cut])
        with pytest.raises(CorruptBundleError):
            load_checkpoint(path)


def test_trailing_bytes_detected(tmp_path):
    path = tmp_path / "x.ckpt"
    save_checkpoint(path, sample_ckpt())
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(CorruptBundleError):
        load_checkpoint(path)


def test_header_body_mismatch(tmp_path):
    path = tmp_path / "mm.ckpt"
    save_checkpoint(path, sample_ckpt(optimizer=False))
    head, body = path.read_bytes().split(b"\n", 1)
    doc = json.loads(head)
    doc["model"]["n_channels"] = 9
    path.write_bytes(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode() + b"\n" + body)
    with pytest.raises(CorruptBundleError):
        load_checkpoint(path)
