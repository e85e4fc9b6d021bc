"""
模型检查点读写

检查点使用区块（chunk）结构，所有整数与浮点均为小端序，每个区块包含：
- 4 字节：区块大小（包含自身和名称）
- 4 字节：区块名称（"HEAD", "META", "TENS"）
- 数据内容

HEAD: uint32 version | uint32 字节序标记 0x01020304 | uint8 dtype（1=float64, 2=float32）
      | uint8 with_align | uint16 保留 | uint32 实体数 | uint32 关系数 | uint32 维度
      | uint32 层数 | uint32 张量个数
META: UTF-8 JSON，包含模型超参数、模型名、KG 名与词表摘要
TENS: uint16 名称长度 | 名称 | uint8 ndim | uint32 × ndim 形状 | 按行优先的原始数据
"""
import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import torch

from ..encoder import KgcModel
from ..errors import CheckpointError
from ..models import MultiKgStore

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
BYTE_ORDER_MARK = 0x01020304
HEAD_FORMAT = '<IIBBHIIIII'
DTYPE_CODES = {"float64": 1, "float32": 2}
NUMPY_DTYPES = {1: np.dtype('<f8'), 2: np.dtype('<f4')}
FUSED_NAME = "fused"


def vocab_digest(names: Iterable[str]) -> str:
    """词表摘要（sha256），用于检查检查点与数据集是否匹配"""
    h = hashlib.sha256()
    for name in names:
        h.update(name.encode('utf-8'))
        h.update(b'\n')
    return h.hexdigest()


def store_vocab_digest(store: MultiKgStore, kg_name: str) -> str:
    """某个 KG（或 fused 表示全部 KG）的实体与关系词表摘要"""
    kgs = store.kgs if kg_name == FUSED_NAME else [store.kg_by_name(kg_name)]
    names: List[str] = []
    for kg in kgs:
        names.append(f"#kg {kg.name}")
        names.extend(kg.entity_names)
        names.append("#relations")
        names.extend(kg.relation_names)
    return vocab_digest(names)


@dataclass
class Checkpoint:
    """解析后的检查点"""
    version: int
    hyperparams: Dict[str, Any]
    meta: Dict[str, Any]
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)


def _chunk(label: str, payload: bytes) -> bytes:
    return struct.pack('<I', len(payload) + 8) + label.encode('ascii') + payload


class CheckpointWriter:
    """检查点写入器"""

    def write(self, model: KgcModel, path, kg_name: str = "", digest: str = "") -> Path:
        path = Path(path)
        hp = model.hyperparams()
        dtype_code = DTYPE_CODES[hp["dtype"]]
        state = model.state_dict()

        head = struct.pack(
            HEAD_FORMAT, CHECKPOINT_VERSION, BYTE_ORDER_MARK, dtype_code, int(hp["with_align"]), 0,
            hp["num_entities"], hp["num_relations"], hp["dim"], hp["layers"], len(state))
        meta = {"hyperparams": hp, "kg_name": kg_name, "vocab_digest": digest}
        chunks = [_chunk('HEAD', head),
                  _chunk('META', json.dumps(meta, sort_keys=True, ensure_ascii=False).encode('utf-8'))]
        for name, tensor in state.items():
            chunks.append(_chunk('TENS', self._pack_tensor(name, tensor, NUMPY_DTYPES[dtype_code])))

        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as f:
            f.write(b''.join(chunks))
        logger.debug("检查点已写入: %s (%d 个张量)", path, len(state))
        return path

    @staticmethod
    def _pack_tensor(name: str, tensor: torch.Tensor, dtype: np.dtype) -> bytes:
        raw_name = name.encode('utf-8')
        arr = np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype=dtype)
        header = struct.pack('<H', len(raw_name)) + raw_name + struct.pack('<B', arr.ndim)
        header += struct.pack(f'<{arr.ndim}I', *arr.shape)
        return header + arr.tobytes(order='C')


class CheckpointParser:
    """检查点解析器"""

    def __init__(self):
        self.file_data = b''
        self.data = b''
        self.offset = 0
        self.chunks: List[Tuple[str, bytes]] = []

    def parse(self, file_path) -> Checkpoint:
        """解析检查点文件"""
        path = Path(file_path)
        if not path.is_file():
            raise CheckpointError(f"检查点不存在: {path}")
        with open(path, 'rb') as f:
            self.file_data = f.read()
        self._read_chunks(path)

        labels = [label for label, _ in self.chunks]
        if labels[:2] != ['HEAD', 'META']:
            raise CheckpointError(f"{path}: 检查点缺少 HEAD/META 区块")

        head = self._parse_head_chunk(path, self.chunks[0][1])
        meta = self._parse_meta_chunk(path, self.chunks[1][1])
        hp = meta.get("hyperparams", {})
        for key in ("num_entities", "num_relations", "dim", "layers", "with_align"):
            if hp.get(key) != head[key]:
                raise CheckpointError(f"{path}: HEAD 与 META 中的 {key} 不一致")

        tensors = {}
        for label, payload in self.chunks[2:]:
            if label != 'TENS':
                raise CheckpointError(f"{path}: 未知区块 {label!r}")
            name, arr = self._parse_tensor_chunk(path, payload, head["dtype"])
            tensors[name] = arr
        if len(tensors) != head["num_tensors"]:
            raise CheckpointError(f"{path}: 张量个数 {len(tensors)} 与 HEAD 中的 {head['num_tensors']} 不一致")
        return Checkpoint(version=head["version"], hyperparams=hp, meta=meta, tensors=tensors)

    def _read_chunks(self, path: Path):
        """读取所有区块，截断或大小非法时报错"""
        self.data = self.file_data
        self.offset = 0
        self.chunks = []
        while self.offset < len(self.data):
            if self.offset + 8 > len(self.data):
                raise CheckpointError(f"{path}: 区块头被截断 (offset {self.offset})")
            chunk_size = self._read_uint32()
            label = self.data[self.offset:self.offset + 4].decode('ascii', errors='replace')
            self.offset += 4
            data_size = chunk_size - 8
            if data_size < 0 or self.offset + data_size > len(self.data):
                raise CheckpointError(f"{path}: 区块 {label!r} 被截断")
            self.chunks.append((label, self.data[self.offset:self.offset + data_size]))
            self.offset += data_size

    def _read_uint32(self) -> int:
        val = struct.unpack_from('<I', self.data, self.offset)[0]
        self.offset += 4
        return val

    def _parse_head_chunk(self, path: Path, payload: bytes) -> Dict[str, Any]:
        if len(payload) != struct.calcsize(HEAD_FORMAT):
            raise CheckpointError(f"{path}: HEAD 区块长度错误")
        (version, bom, dtype_code, with_align, _reserved, n_ent, n_rel, dim, layers,
         n_tensors) = struct.unpack(HEAD_FORMAT, payload)
        if bom != BYTE_ORDER_MARK:
            raise CheckpointError(f"{path}: 字节序标记不匹配 (0x{bom:08x})")
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: 不支持的检查点版本 {version}")
        if dtype_code not in NUMPY_DTYPES:
            raise CheckpointError(f"{path}: 未知的 dtype 编码 {dtype_code}")
        return {"version": version, "dtype": NUMPY_DTYPES[dtype_code], "with_align": bool(with_align),
                "num_entities": n_ent, "num_relations": n_rel, "dim": dim, "layers": layers,
                "num_tensors": n_tensors}

    @staticmethod
    def _parse_meta_chunk(path: Path, payload: bytes) -> Dict[str, Any]:
        try:
            meta = json.loads(payload.decode('utf-8'))
        except (UnicodeDecodeError, ValueError) as e:
            raise CheckpointError(f"{path}: META 区块不是合法 JSON: {e}") from e
        if not isinstance(meta, dict):
            raise CheckpointError(f"{path}: META 区块必须是 JSON 对象")
        return meta

    def _parse_tensor_chunk(self, path: Path, payload: bytes, dtype: np.dtype) -> Tuple[str, np.ndarray]:
        try:
            pos = 0
            (name_len,) = struct.unpack_from('<H', payload, pos)
            pos += 2
            name = payload[pos:pos + name_len].decode('utf-8')
            pos += name_len
            (ndim,) = struct.unpack_from('<B', payload, pos)
            pos += 1
            shape = struct.unpack_from(f'<{ndim}I', payload, pos)
            pos += 4 * ndim
        except (struct.error, UnicodeDecodeError) as e:
            raise CheckpointError(f"{path}: TENS 区块头损坏: {e}") from e
        count = int(np.prod(shape)) if ndim else 1
        if len(payload) - pos != count * dtype.itemsize:
            raise CheckpointError(f"{path}: 张量 {name} 数据长度与形状 {tuple(shape)} 不符")
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=pos).reshape(shape).copy()
        return name, arr


def save_checkpoint(model: KgcModel, path, kg_name: str = "", digest: str = "") -> Path:
    return CheckpointWriter().write(model, path, kg_name=kg_name, digest=digest)


def load_checkpoint(path, expected_digest: Optional[str] = None) -> KgcModel:
    """读取检查点并重建模型；给定 expected_digest 时检查词表是否匹配"""
    ckpt = CheckpointParser().parse(path)
    stored = ckpt.meta.get("vocab_digest", "")
    if expected_digest is not None and stored != expected_digest:
        raise CheckpointError(f"{path}: 检查点词表摘要与数据集不匹配")
    try:
        model = KgcModel(**ckpt.hyperparams)
        state = {name: torch.from_numpy(arr) for name, arr in ckpt.tensors.items()}
        model.load_state_dict(state, strict=True)
    except (TypeError, KeyError, ValueError, RuntimeError) as e:
        raise CheckpointError(f"{path}: 无法由检查点重建模型: {e}") from e
    return model
