"""
清单文件解析器

解析 YAML 格式的数据集清单，相对路径以清单所在目录为基准
"""
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from ..errors import ConfigError
from ..models import AlignmentEntry, DatasetManifest, KgEntry

logger = logging.getLogger(__name__)


class ManifestParser:
    """YAML 清单解析器"""

    def __init__(self):
        self.base_dir = Path(".")

    def parse(self, file_path) -> DatasetManifest:
        """解析清单文件"""
        path = Path(file_path)
        if not path.is_file():
            raise ConfigError(f"清单文件不存在: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (yaml.YAMLError, UnicodeDecodeError) as e:
            raise ConfigError(f"清单文件不是合法的 UTF-8 YAML: {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"清单文件顶层必须是映射: {path}")

        self.base_dir = path.parent
        kgs = [self._parse_kg_entry(entry, idx) for idx, entry in enumerate(data.get("kgs") or [])]
        alignments = [self._parse_alignment_entry(entry) for entry in data.get("alignments") or []]
        manifest = DatasetManifest(
            name=str(data.get("name", path.stem)),
            kgs=kgs,
            alignments=alignments,
            shared_relation_schema=self._parse_flag(data, "shared_relation_schema"),
            source=path,
        )
        logger.debug("清单 %s: %d 个 KG，%d 个对齐文件", manifest.name, len(kgs), len(alignments))
        return manifest

    def _parse_flag(self, data: Dict[str, Any], key: str) -> bool:
        """布尔字段必须写成 YAML 布尔值，带引号的 "false" 之类一律拒绝"""
        value = data.get(key, False)
        if not isinstance(value, bool):
            raise ConfigError(f"清单字段 {key} 必须是布尔值 true/false，得到 {value!r}")
        return value

    def _resolve(self, value: Any, field_name: str) -> Path:
        if not isinstance(value, str) or not value:
            raise ConfigError(f"清单字段 {field_name} 必须是非空路径字符串")
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def _optional_path(self, entry: Dict[str, Any], key: str) -> Optional[Path]:
        value = entry.get(key)
        return None if value is None else self._resolve(value, key)

    def _parse_kg_entry(self, entry: Any, idx: int) -> KgEntry:
        """解析单个 KG 条目"""
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"清单第 {idx} 个 KG 条目缺少 name")
        missing = [k for k in ("train", "valid", "test") if k not in entry]
        if missing:
            raise ConfigError(f"KG {entry['name']} 缺少字段: {missing}")
        hint = entry.get("entity_count_hint")
        return KgEntry(
            name=str(entry["name"]),
            train=self._resolve(entry["train"], "train"),
            valid=self._resolve(entry["valid"], "valid"),
            test=self._resolve(entry["test"], "test"),
            entities=self._optional_path(entry, "entities"),
            relations=self._optional_path(entry, "relations"),
            entity_count_hint=None if hint is None else int(hint),
        )

    def _parse_alignment_entry(self, entry: Any) -> AlignmentEntry:
        """解析对齐文件条目"""
        if not isinstance(entry, dict) or "kgs" not in entry or "path" not in entry:
            raise ConfigError("对齐条目必须包含 kgs 和 path")
        pair = entry["kgs"]
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"对齐条目 kgs 必须是两个 KG 名称: {pair}")
        return AlignmentEntry(kgs=(str(pair[0]), str(pair[1])), path=self._resolve(entry["path"], "path"))


def load_manifest(file_path) -> DatasetManifest:
    return ManifestParser().parse(file_path)


def manifest_to_dict(manifest: DatasetManifest, relative_to: Optional[Path] = None) -> Dict[str, Any]:
    """清单转换为可写出的映射"""
    def fmt(p: Optional[Path]):
        if p is None:
            return None
        if relative_to is not None:
            try:
                return Path(p).relative_to(relative_to).as_posix()
            except ValueError:
                pass
        return str(Path(p).resolve()) if relative_to is None else str(p)

    kgs = []
    for kg in manifest.kgs:
        item = {"name": kg.name, "train": fmt(kg.train), "valid": fmt(kg.valid), "test": fmt(kg.test)}
        if kg.entities is not None:
            item["entities"] = fmt(kg.entities)
        if kg.relations is not None:
            item["relations"] = fmt(kg.relations)
        if kg.entity_count_hint is not None:
            item["entity_count_hint"] = kg.entity_count_hint
        kgs.append(item)
    return {
        "name": manifest.name,
        "shared_relation_schema": manifest.shared_relation_schema,
        "kgs": kgs,
        "alignments": [{"kgs": list(a.kgs), "path": fmt(a.path)} for a in manifest.alignments],
    }


def write_manifest(manifest: DatasetManifest, path: Path, relative: bool = True) -> Path:
    """写出清单；relative 为真时路径相对清单所在目录"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = manifest_to_dict(manifest, relative_to=path.parent if relative else None)
    path.write_text(yaml.safe_dump(data, sort_keys=False, allow_unicode=True), encoding="utf-8")
    return path
