"""
Model checkpoint container (little-endian, deterministic bytes).

    magic           8 bytes  b"LENACKPT"
    version         u32
    config length   u64
    config          UTF-8 JSON of ModelConfig, sorted keys
    tensor count    u32
    per tensor:
        name length u16, name UTF-8
        ndim        u8, ndim x u64 extents
        values      <f8 row-major

Tensors are written in canonical parameter order, eta included.
"""
import io
import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
from pydantic import ValidationError

from viraliency.core.exceptions import EtaRangeError, NonFiniteError, ParseError, ShapeMismatchError
from viraliency.core.logging import get_run_logger
from viraliency.schemas.model import ModelConfig
from viraliency.services.siamese import ViralityNet

logger = get_run_logger(__name__)

MAGIC = b"LENACKPT"
FORMAT_VERSION = 1


def checkpoint_bytes(model: ViralityNet) -> bytes:
    buffer = io.BytesIO()
    config_json = json.dumps(model.config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    config_blob = config_json.encode("utf-8")
    buffer.write(MAGIC)
    buffer.write(struct.pack("<IQ", FORMAT_VERSION, len(config_blob)))
    buffer.write(config_blob)
    buffer.write(struct.pack("<I", len(model.params)))
    for name, value in model.params.items():
        encoded = name.encode("utf-8")
        buffer.write(struct.pack("<H", len(encoded)))
        buffer.write(encoded)
        buffer.write(struct.pack("<B", value.ndim))
        buffer.write(struct.pack(f"<{value.ndim}Q", *value.shape))
        buffer.write(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return buffer.getvalue()


def save_checkpoint(path: Union[str, Path], model: ViralityNet) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = checkpoint_bytes(model)
    path.write_bytes(payload)
    logger.info("Checkpoint written", path=str(path), bytes=len(payload), parameters=model.num_parameters)
    return path


class _Reader:
    def __init__(self, stream: BinaryIO, source: str):
        self.stream = stream
        self.source = source

    def read(self, size: int, what: str) -> bytes:
        offset = self.stream.tell()
        data = self.stream.read(size)
        if len(data) != size:
            raise ParseError(self.source, f"truncated while reading {what}", position=f"byte {offset}")
        return data

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt), what))


def read_checkpoint(data: bytes, source: str = "<bytes>") -> ViralityNet:
    """
    Raises:
        ParseError: bad magic or version, truncation, invalid config or tensors
    """
    reader = _Reader(io.BytesIO(data), source)
    if reader.read(len(MAGIC), "magic") != MAGIC:
        raise ParseError(source, "not a viraliency checkpoint (bad magic)", position="byte 0")
    version, config_length = reader.unpack("<IQ", "header")
    if version != FORMAT_VERSION:
        raise ParseError(source, f"unsupported checkpoint version {version}", position="byte 8")
    try:
        config = ModelConfig.model_validate_json(reader.read(config_length, "config"))
    except ValidationError as e:
        raise ParseError(source, f"invalid model config ({e.error_count()} error(s))", position="byte 20")

    (count,) = reader.unpack("<I", "tensor count")
    params = OrderedDict()
    for _ in range(count):
        (name_length,) = reader.unpack("<H", "tensor name length")
        try:
            name = reader.read(name_length, "tensor name").decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError(source, "tensor name is not UTF-8", position=f"byte {reader.stream.tell()}")
        (ndim,) = reader.unpack("<B", "tensor rank")
        shape = reader.unpack(f"<{ndim}Q", f"{name} extents") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(reader.read(8 * size, f"{name} values"), dtype="<f8")
        params[name] = values.astype(np.float64).reshape(shape)

    trailing = reader.stream.read()
    if trailing:
        raise ParseError(source, f"{len(trailing)} trailing bytes", position=f"byte {len(data) - len(trailing)}")
    try:
        return ViralityNet(config, params)
    except (ShapeMismatchError, EtaRangeError, NonFiniteError) as e:
        raise ParseError(source, f"inconsistent tensors ({e.message})")


def load_checkpoint(path: Union[str, Path]) -> ViralityNet:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise ParseError(str(path), "file not found")
    return read_checkpoint(data, source=str(path))
