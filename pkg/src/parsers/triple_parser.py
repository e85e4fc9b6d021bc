"""
TSV 数据集解析器

三元组文件：head<TAB>relation<TAB>tail，每行一个，无表头，UTF-8
对齐文件：left_entity<TAB>right_entity，KG 归属由清单条目给出
词表文件（可选）：每行一个名称，行号即 id

文件读取可以并发进行，实体/关系编号严格按清单顺序串行完成，
保证同一组文件总是得到相同的 id 分配。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError, ParseError
from ..models import (
    SPLITS, AlignmentEntry, DatasetManifest, EntityRef, KgData, KgEntry,
    MultiKgStore, SeedAlignment,
)
from .manifest_parser import write_manifest

logger = logging.getLogger(__name__)

Rows = List[Tuple[int, Tuple[str, ...]]]  # (行号, 列)


class _Vocab:
    """按首次出现顺序编号的词表"""

    def __init__(self):
        self.names: List[str] = []
        self.index: Dict[str, int] = {}

    def intern(self, name: str) -> int:
        idx = self.index.get(name)
        if idx is None:
            idx = len(self.names)
            self.index[name] = idx
            self.names.append(name)
        return idx

    def __len__(self):
        return len(self.names)


class TsvDatasetParser:
    """TSV 数据集解析器"""

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads
        self.warnings: List[str] = []

    def parse(self, manifest: DatasetManifest) -> MultiKgStore:
        """按清单加载全部 KG 与对齐"""
        self.warnings = []

        # 并发读取所有文件
        jobs: List[Tuple[Path, int]] = []
        for entry in manifest.kgs:
            if entry.entities is not None:
                jobs.append((entry.entities, 1))
            if entry.relations is not None:
                jobs.append((entry.relations, 1))
            for split in SPLITS:
                jobs.append((getattr(entry, split), 3))
        for align in manifest.alignments:
            jobs.append((align.path, 2))
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = list(pool.map(lambda job: self._read_rows(*job), jobs))
        rows: Dict[Path, Rows] = {path: res for (path, _), res in zip(jobs, results)}

        # 串行编号
        shared_relations = _Vocab() if manifest.shared_relation_schema else None
        kgs = []
        entity_vocabs = []
        for kg_id, entry in enumerate(manifest.kgs):
            kg, vocab = self._parse_kg(kg_id, entry, rows, shared_relations)
            kgs.append(kg)
            entity_vocabs.append(vocab)
        if shared_relations is not None:
            for kg in kgs:
                kg.relation_names = list(shared_relations.names)

        alignments = set()
        for align in manifest.alignments:
            alignments |= self._parse_alignments(manifest, align, rows[align.path], entity_vocabs)

        store = MultiKgStore(
            name=manifest.name,
            kgs=kgs,
            alignments=frozenset(alignments),
            shared_relation_schema=manifest.shared_relation_schema,
            warnings=list(self.warnings),
        )
        store.validate()
        for kg in kgs:
            logger.info("KG %s: |E|=%d |R|=%d train=%d valid=%d test=%d",
                        kg.name, kg.num_entities, kg.num_relations,
                        len(kg.train), len(kg.valid), len(kg.test))
        logger.info("对齐: %d 对", len(alignments))
        return store

    def _read_rows(self, path: Path, columns: int) -> Rows:
        """读取 TSV 文件，校验列数"""
        if not Path(path).is_file():
            raise ConfigError(f"数据文件不存在: {path}")
        rows: Rows = []
        with open(path, "rb") as f:
            for line_no, raw in enumerate(f, start=1):
                try:
                    line = raw.decode("utf-8").rstrip("\r\n")
                except UnicodeDecodeError as e:
                    raise ParseError(str(path), line_no, f"不是合法的 UTF-8: {e.reason}") from e
                if not line.strip():
                    continue
                parts = tuple(line.split("\t"))
                if columns == 1:
                    parts = parts[:1]
                elif len(parts) != columns:
                    raise ParseError(str(path), line_no, f"列数为 {len(parts)}，应为 {columns}")
                rows.append((line_no, parts))
        return rows

    def _parse_kg(self, kg_id: int, entry: KgEntry, rows: Dict[Path, Rows],
                  shared_relations: Optional[_Vocab]) -> Tuple[KgData, _Vocab]:
        """为单个 KG 编号实体和关系"""
        entities = _Vocab()
        relations = shared_relations if shared_relations is not None else _Vocab()
        if entry.entities is not None:
            for _, (name,) in rows[entry.entities]:
                entities.intern(name)
        if entry.relations is not None:
            for _, (name,) in rows[entry.relations]:
                relations.intern(name)

        arrays = {}
        for split in SPLITS:
            ids = [(entities.intern(h), relations.intern(r), entities.intern(t))
                   for _, (h, r, t) in rows[getattr(entry, split)]]
            arrays[split] = np.array(ids, dtype=np.int64).reshape(-1, 3)

        kg = KgData(
            name=entry.name,
            kg_id=kg_id,
            entity_names=list(entities.names),
            relation_names=list(relations.names),
            train=arrays["train"],
            valid=arrays["valid"],
            test=arrays["test"],
        )
        if entry.entity_count_hint is not None and entry.entity_count_hint != kg.num_entities:
            self._warn(f"{kg.name}: 实体数 {kg.num_entities} 与提示值 {entry.entity_count_hint} 不符")
        unseen = kg.unseen_entities()
        if unseen:
            self._warn(f"{kg.name}: {len(unseen)} 个实体只出现在验证/测试集中，相关查询照常计入")
        return kg, entities

    def _parse_alignments(self, manifest: DatasetManifest, align: AlignmentEntry, rows: Rows,
                          vocabs: List[_Vocab]) -> set:
        """解析对齐文件，实体必须已在对应 KG 中出现"""
        left_kg = manifest.kg_index(align.kgs[0])
        right_kg = manifest.kg_index(align.kgs[1])
        pairs = set()
        for line_no, (left, right) in rows:
            left_id = vocabs[left_kg].index.get(left)
            right_id = vocabs[right_kg].index.get(right)
            if left_id is None or right_id is None:
                missing = left if left_id is None else right
                raise ParseError(str(align.path), line_no, f"对齐引用了未知实体: {missing}")
            pairs.add(SeedAlignment.canonical(EntityRef(left_kg, left_id), EntityRef(right_kg, right_id)))
        return pairs

    def _warn(self, message: str):
        self.warnings.append(message)
        logger.warning(message)


def load_dataset(manifest: DatasetManifest, threads: Optional[int] = None) -> MultiKgStore:
    return TsvDatasetParser(threads=threads).parse(manifest)


class DatasetWriter:
    """把 MultiKgStore 写成 TSV 数据集和清单，重新加载后 id 完全一致"""

    def write(self, store: MultiKgStore, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        kg_entries = []
        for kg in store.kgs:
            kg_dir = out_dir / kg.name
            kg_dir.mkdir(parents=True, exist_ok=True)
            self._write_lines(kg_dir / "entities.tsv", kg.entity_names)
            self._write_lines(kg_dir / "relations.tsv", kg.relation_names)
            for split in SPLITS:
                self._write_lines(kg_dir / f"{split}.tsv", [
                    f"{kg.entity_names[h]}\t{kg.relation_names[r]}\t{kg.entity_names[t]}"
                    for h, r, t in kg.split(split)
                ])
            kg_entries.append(KgEntry(
                name=kg.name,
                train=kg_dir / "train.tsv",
                valid=kg_dir / "valid.tsv",
                test=kg_dir / "test.tsv",
                entities=kg_dir / "entities.tsv",
                relations=kg_dir / "relations.tsv",
                entity_count_hint=kg.num_entities,
            ))

        # 按 KG 对分组写出对齐
        groups: Dict[Tuple[int, int], List[SeedAlignment]] = {}
        for a in store.sorted_alignments():
            groups.setdefault((a.left.kg_id, a.right.kg_id), []).append(a)
        align_entries = []
        if groups:
            (out_dir / "alignments").mkdir(parents=True, exist_ok=True)
        for (li, ri), pairs in sorted(groups.items()):
            left, right = store.kgs[li], store.kgs[ri]
            path = out_dir / "alignments" / f"{left.name}__{right.name}.tsv"
            self._write_lines(path, [
                f"{left.entity_names[a.left.local_id]}\t{right.entity_names[a.right.local_id]}"
                for a in pairs
            ])
            align_entries.append(AlignmentEntry(kgs=(left.name, right.name), path=path))

        manifest = DatasetManifest(
            name=store.name,
            kgs=kg_entries,
            alignments=align_entries,
            shared_relation_schema=store.shared_relation_schema,
        )
        return write_manifest(manifest, out_dir / "manifest.yaml")

    def _write_lines(self, path: Path, lines: List[str]):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for line in lines:
                f.write(line)
                f.write("\n")


def write_dataset(store: MultiKgStore, out_dir) -> Path:
    """写出数据集，返回清单路径"""
    return DatasetWriter().write(store, out_dir)
