r"""
Binary checkpoints of a run.

Layout, all integers little-endian:

    magic      4 bytes  b"RELG"
    version    uint32   FORMAT_VERSION
    records    until the end of the file, each:
        name_len  uint32
        name      name_len bytes, UTF-8
        dtype     uint8    0 float32, 1 float64, 2 int64, 3 uint8
        rank      uint32
        dims      rank × int64
        values    prod(dims) values, raw little-endian, row-major

Record names:

    meta/config                     resolved configuration, JSON bytes (uint8)
    net/<network>/<param>           parameters of each owned network
    adam/<network>/m/<param>        first moments
    adam/<network>/v/<param>        second moments
    adam/<network>/step/<param>     update counts (int64 scalar)
    phase/phase, phase/history, phase/previous_mean, phase/windows_stagnant,
    phase/step, phase/transition_step
    run/step, run/seed

Tied quartets have no record for the primed generators. An absent
`previous_mean` is an empty array, an absent `transition_step` is -1.
"""

import json
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, Union

import numpy as np
import torch
from loguru import logger

from relgan.errors import CheckpointError
from relgan.nn.optim import AdamState
from relgan.trainer.schedule import Phase, PhaseState
from relgan.utils import fs

if TYPE_CHECKING:
    from relgan.trainer.trainer import RunState

PathLike = Union[str, os.PathLike]

MAGIC = b"RELG"
FORMAT_VERSION = 1

DTYPE_TAGS = OrderedDict(
    [
        (0, np.dtype("<f4")),
        (1, np.dtype("<f8")),
        (2, np.dtype("<i8")),
        (3, np.dtype("u1")),
    ]
)
TAG_OF_DTYPE = {dtype.str.replace("|", "<"): tag for tag, dtype in DTYPE_TAGS.items()}


def _tag(array: np.ndarray) -> int:
    key = array.dtype.newbyteorder("<").str.replace("|", "<")
    if key not in TAG_OF_DTYPE:
        raise CheckpointError(f"Unsupported dtype {array.dtype} in a checkpoint record")
    return TAG_OF_DTYPE[key]


def encode_records(records: Dict[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for name, array in records.items():
        array = np.asarray(array)
        tag = _tag(array)
        name_bytes = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<BI", tag, array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}q", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype=DTYPE_TAGS[tag]).tobytes())
    return b"".join(chunks)


def decode_records(data: bytes, source: str = "<bytes>") -> Dict[str, np.ndarray]:
    if len(data) < 8 or data[:4] != MAGIC:
        raise CheckpointError(f"bad magic in {source}: not a relgan checkpoint")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"Unsupported checkpoint version {version} in {source}, expected {FORMAT_VERSION}"
        )

    records: Dict[str, np.ndarray] = OrderedDict()
    offset = 8
    try:
        while offset < len(data):
            (name_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            name = data[offset : offset + name_len].decode("utf-8")
            if len(name) == 0 or offset + name_len > len(data):
                raise CheckpointError(f"Truncated record name at byte {offset} of {source}")
            offset += name_len
            tag, rank = struct.unpack_from("<BI", data, offset)
            offset += 5
            if tag not in DTYPE_TAGS:
                raise CheckpointError(f"Unknown dtype tag {tag} for record `{name}` of {source}")
            dims = struct.unpack_from(f"<{rank}q", data, offset)
            offset += 8 * rank
            dtype = DTYPE_TAGS[tag]
            n_bytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
            if offset + n_bytes > len(data):
                raise CheckpointError(f"Truncated values for record `{name}` of {source}")
            if n_bytes == 0:
                array = np.zeros(dims, dtype=dtype)
            else:
                array = np.frombuffer(data, dtype=dtype, count=n_bytes // dtype.itemsize, offset=offset)
                array = array.reshape(dims)
            offset += n_bytes
            if name in records:
                raise CheckpointError(f"Duplicate record `{name}` in {source}")
            records[name] = array.copy()
    except (struct.error, UnicodeDecodeError, ValueError) as e:
        raise CheckpointError(f"Corrupt checkpoint {source}: {e}") from e
    return records


def write_checkpoint(records: Dict[str, np.ndarray], path: PathLike) -> None:
    try:
        fs.write_bytes(path, encode_records(records))
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}") from e


def read_checkpoint(path: PathLike) -> Dict[str, np.ndarray]:
    if not fs.exists(path):
        raise CheckpointError(f"Checkpoint does not exist: {path}")
    return decode_records(fs.read_bytes(path), source=str(path))


def _array(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().contiguous().numpy()


def _int(value: int) -> np.ndarray:
    return np.asarray(value, dtype="<i8")


def state_records(state: "RunState", config: Dict[str, Any]) -> Dict[str, np.ndarray]:
    """The records of a run state, in the order they are written."""
    records: Dict[str, np.ndarray] = OrderedDict()
    records["meta/config"] = np.frombuffer(json.dumps(config, sort_keys=True).encode("utf-8"), dtype=np.uint8)

    quartet = state.quartet
    names = quartet.owned_network_names()
    for net_name in names:
        for param_name, param in quartet.network(net_name).named_parameters():
            records[f"net/{net_name}/{param_name}"] = _array(param)
    for net_name in names:
        adam = state.optimizers[net_name]
        # parameter order of the network, for canonical bytes
        param_names = [p for p, _ in quartet.network(net_name).named_parameters() if p in adam.m]
        for kind in ("m", "v"):
            for param_name in param_names:
                records[f"adam/{net_name}/{kind}/{param_name}"] = _array(getattr(adam, kind)[param_name])
        for param_name in param_names:
            records[f"adam/{net_name}/step/{param_name}"] = _int(adam.steps[param_name])

    phase = state.phase
    records["phase/phase"] = _int(phase.phase.value)
    records["phase/history"] = np.asarray(phase.history, dtype="<f8").reshape(-1)
    previous = [] if phase.previous_mean is None else phase.previous_mean
    records["phase/previous_mean"] = np.asarray(previous, dtype="<f8")
    records["phase/windows_stagnant"] = _int(phase.windows_stagnant)
    records["phase/step"] = _int(phase.step)
    records["phase/transition_step"] = _int(-1 if phase.transition_step is None else phase.transition_step)

    records["run/step"] = _int(state.step)
    records["run/seed"] = _int(state.seed)
    return records


def save_checkpoint(state: "RunState", config: Dict[str, Any], path: PathLike) -> None:
    r"""
    Write the run state and its resolved configuration (a JSON-serializable
    dict) to `path`. Saving the state loaded from a checkpoint reproduces the
    file byte for byte.
    """
    write_checkpoint(state_records(state, config), path)
    logger.info(f"Checkpoint written at step {state.step}: {path}")


@dataclass
class Checkpoint:
    records: Dict[str, np.ndarray]
    path: str = ""

    @property
    def config(self) -> Dict[str, Any]:
        if "meta/config" not in self.records:
            raise CheckpointError(f"Checkpoint {self.path} has no `meta/config` record")
        return json.loads(self.records["meta/config"].tobytes().decode("utf-8"))

    @property
    def step(self) -> int:
        return int(self._get("run/step"))

    def _get(self, name: str) -> np.ndarray:
        if name not in self.records:
            raise CheckpointError(f"Checkpoint {self.path} has no `{name}` record")
        return self.records[name]

    def _tensor(self, name: str, dtype: torch.dtype) -> torch.Tensor:
        return torch.from_numpy(self._get(name).copy()).to(dtype)

    def restore_networks(self, quartet: torch.nn.Module) -> None:
        r"""Copy the parameters into a quartet of the same architecture, checking names and shapes."""
        expected = set()
        with torch.no_grad():
            for net_name in quartet.owned_network_names():
                for param_name, param in quartet.network(net_name).named_parameters():
                    name = f"net/{net_name}/{param_name}"
                    expected.add(name)
                    value = self._get(name)
                    if tuple(value.shape) != tuple(param.shape):
                        raise CheckpointError(
                            f"Record `{name}` has shape {tuple(value.shape)}, "
                            f"the network expects {tuple(param.shape)}"
                        )
                    param.copy_(torch.from_numpy(value.copy()).to(param.dtype))
        extra = sorted(n for n in self.records if n.startswith("net/") and n not in expected)
        if extra:
            raise CheckpointError(f"Checkpoint {self.path} holds networks the quartet does not own: {extra}")

    def restore(self, state: "RunState") -> "RunState":
        r"""
        Fill a freshly initialized run state (same configuration) with the
        checkpointed networks, optimizer moments, phase and counters.
        """
        quartet = state.quartet
        self.restore_networks(quartet)

        optimizers = {}
        for net_name in quartet.owned_network_names():
            adam = AdamState()
            for param_name, param in quartet.network(net_name).named_parameters():
                step_name = f"adam/{net_name}/step/{param_name}"
                if step_name not in self.records:
                    continue
                adam.m[param_name] = self._tensor(f"adam/{net_name}/m/{param_name}", param.dtype)
                adam.v[param_name] = self._tensor(f"adam/{net_name}/v/{param_name}", param.dtype)
                adam.steps[param_name] = int(self.records[step_name])
            optimizers[net_name] = adam

        previous = self._get("phase/previous_mean")
        transition_step = int(self._get("phase/transition_step"))
        phase = PhaseState(
            phase=Phase(int(self._get("phase/phase"))),
            history=tuple(float(v) for v in self._get("phase/history")),
            previous_mean=None if previous.size == 0 else float(previous),
            windows_stagnant=int(self._get("phase/windows_stagnant")),
            step=int(self._get("phase/step")),
            transition_step=None if transition_step < 0 else transition_step,
        )
        state.optimizers = optimizers
        state.phase = phase
        state.step = int(self._get("run/step"))
        state.seed = int(self._get("run/seed"))
        return state


def load_checkpoint(path: PathLike) -> Checkpoint:
    return Checkpoint(records=read_checkpoint(path), path=str(path))
