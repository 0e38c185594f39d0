"""
Unit tests for the binary checkpoints of relgan/trainer/checkpoint.py
"""

import struct
import tempfile
import unittest as ut
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from relgan.errors import CheckpointError
from relgan.trainer.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    decode_records,
    encode_records,
    load_checkpoint,
    save_checkpoint,
    state_records,
)
from relgan.trainer.trainer import init_run_state, load_task_data, resolved_config, train_step
from relgan.utils.hashing import tensor_checksum
from tests.conftest import tiny_config


def trained_state(cfg, steps=2):
    state = init_run_state(cfg)
    train_set, _ = load_task_data(cfg)
    for _ in range(steps):
        state, _ = train_step(state, train_set.images_a[:2], train_set.images_b[:2], cfg)
    return state


class test_Records(ut.TestCase):
    def test_header(self):
        data = encode_records({})
        self.assertEqual(data[:4], MAGIC)
        self.assertEqual(struct.unpack("<I", data[4:8])[0], FORMAT_VERSION)
        self.assertEqual(len(data), 8)

    def test_record_layout(self):
        data = encode_records({"x": np.asarray([1.0, 2.0], dtype="<f8")})
        # name_len, name, tag, rank, dims, values
        expected = struct.pack("<I", 1) + b"x" + struct.pack("<BI", 1, 1) + struct.pack("<q", 2)
        expected += struct.pack("<2d", 1.0, 2.0)
        self.assertEqual(data[8:], expected)

    def test_decode_restores_every_dtype(self):
        records = {
            "f32": np.arange(6, dtype="<f4").reshape(2, 3),
            "f64": np.asarray(0.25, dtype="<f8"),
            "i64": np.asarray([-1, 5], dtype="<i8"),
            "u8": np.frombuffer(b"{}", dtype=np.uint8),
            "empty": np.zeros((0,), dtype="<f8"),
        }
        decoded = decode_records(encode_records(records))
        self.assertListEqual(list(decoded), list(records))
        for name, array in records.items():
            self.assertEqual(decoded[name].dtype, array.dtype, name)
            np.testing.assert_array_equal(decoded[name], array)

    def test_bad_magic(self):
        with self.assertRaises(CheckpointError) as ctx:
            decode_records(b"PNG\x00" + encode_records({})[4:])
        self.assertIn("bad magic", str(ctx.exception))
        with self.assertRaises(CheckpointError):
            decode_records(b"RE")

    def test_unsupported_version(self):
        data = MAGIC + struct.pack("<I", FORMAT_VERSION + 1)
        with self.assertRaises(CheckpointError):
            decode_records(data)

    def test_truncation(self):
        data = encode_records({"w": np.ones((4, 4), dtype="<f4"), "v": np.ones(3, dtype="<f8")})
        for cut in (9, 14, 20, len(data) - 1):
            with self.assertRaises(CheckpointError):
                decode_records(data[:cut])

    def test_unsupported_dtype(self):
        with self.assertRaises(CheckpointError):
            encode_records({"x": np.ones(2, dtype=np.float16)})


class test_RunCheckpoint(ut.TestCase):
    def test_save_load_save_is_byte_identical(self):
        cfg = tiny_config()
        state = trained_state(cfg)
        config = resolved_config(cfg)
        with tempfile.TemporaryDirectory() as tmp:
            first, second = Path(tmp) / "a.relg", Path(tmp) / "b.relg"
            save_checkpoint(state, config, first)
            checkpoint = load_checkpoint(first)
            restored = checkpoint.restore(init_run_state(cfg))
            save_checkpoint(restored, checkpoint.config, second)
            self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertEqual(checkpoint.step, 2)
        self.assertEqual(checkpoint.config, config)
        self.assertEqual(restored.phase, state.phase)
        self.assertEqual(
            tensor_checksum(restored.quartet.parameters()), tensor_checksum(state.quartet.parameters())
        )

    def test_tied_quartet_has_no_primed_records(self):
        cfg = tiny_config(tied=True)
        records = state_records(init_run_state(cfg), resolved_config(cfg))
        self.assertFalse(any("prime" in name for name in records))
        self.assertTrue(any(name.startswith("net/g_ab/") for name in records))
        self.assertEqual(int(records["phase/transition_step"]), -1)
        self.assertEqual(records["phase/previous_mean"].size, 0)

    def test_restore_refuses_another_architecture(self):
        cfg = tiny_config()
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ckpt.relg"
            save_checkpoint(init_run_state(cfg), resolved_config(cfg), path)
            checkpoint = load_checkpoint(path)
        with self.assertRaises(CheckpointError):
            checkpoint.restore(init_run_state(tiny_config(arch=replace(cfg.arch, base_channels=8))))
        with self.assertRaises(CheckpointError):
            # the primed generators of the untied checkpoint have no home
            checkpoint.restore(init_run_state(tiny_config(tied=True)))

    def test_missing_file_and_records(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint("/nonexistent/ckpt.relg")
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "partial.relg"
            path.write_bytes(encode_records({"run/step": np.asarray(3, dtype="<i8")}))
            checkpoint = load_checkpoint(path)
        self.assertEqual(checkpoint.step, 3)
        with self.assertRaises(CheckpointError):
            checkpoint.config
        with self.assertRaises(CheckpointError):
            checkpoint.restore(init_run_state(tiny_config()))

    def test_restored_moments_continue_training(self):
        cfg = tiny_config()
        state = trained_state(cfg)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ckpt.relg"
            save_checkpoint(state, resolved_config(cfg), path)
            restored = load_checkpoint(path).restore(init_run_state(cfg))
        for name, adam in state.optimizers.items():
            self.assertEqual(restored.optimizers[name].steps, adam.steps)
            for param_name, m in adam.m.items():
                self.assertTrue(torch.equal(restored.optimizers[name].m[param_name], m))


if __name__ == "__main__":
    ut.main()
