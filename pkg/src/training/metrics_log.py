"""
训练指标日志：每个 epoch 每个模型一行

    epoch<TAB>model<TAB>loss_T<TAB>loss_D<TAB>val_mrr

不适用或本 epoch 未计算的字段写 NA。第二阶段另外为每个 KG 写一行
`fused<-{kg}`，记录该 KG 的个体模型教给融合模型的蒸馏损失。
"""
import csv
from pathlib import Path
from typing import List, Optional, Sequence

HEADER = ("epoch", "model", "loss_T", "loss_D", "val_mrr")
NA = "NA"


def _fmt(value: Optional[float]) -> str:
    return NA if value is None else f"{value:.8f}"


def fused_from(kg_name: str) -> str:
    return f"fused<-{kg_name}"


class MetricsLog:
    """按行追加写入的 TSV 指标日志；path 为空时只保存在内存中"""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path is not None else None
        self.rows: List[List[str]] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._append(HEADER, mode="w")

    def _append(self, row: Sequence[str], mode: str = "a"):
        with open(self.path, mode, newline="", encoding="utf-8") as f:
            csv.writer(f, delimiter="\t", lineterminator="\n").writerow(row)

    def record(self, epoch: int, model: str, loss_t: Optional[float] = None,
               loss_d: Optional[float] = None, val_mrr: Optional[float] = None):
        row = [str(epoch), model, _fmt(loss_t), _fmt(loss_d), _fmt(val_mrr)]
        self.rows.append(row)
        if self.path is not None:
            self._append(row)

    def column(self, name: str, model: Optional[str] = None) -> List[str]:
        """某一列的所有取值（可按模型过滤）"""
        idx = HEADER.index(name)
        return [row[idx] for row in self.rows if model is None or row[1] == model]
