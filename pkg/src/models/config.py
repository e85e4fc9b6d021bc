"""
配置数据模型

训练配置、数据集清单、采样参数与运行配置
"""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..errors import ConfigError

SCORE_FNS = ("transe_l1", "transe_l2", "distmult")
COMPOSITIONS = ("sub", "mult")
ACTIVATIONS = ("tanh", "identity")
FUSED_MESSAGES = ("augmented", "plain")
FILTER_MODES = ("traditional", "train_only", "raw")
TASKS = ("head", "tail")
DTYPES = ("float64", "float32")
INT_FIELDS = ("top_k", "neg_samples", "dim", "layers", "epochs_stage1", "epochs_stage2", "batch_size",
              "seed", "eval_every", "patience", "max_resample")
FLOAT_FIELDS = ("gamma", "alpha", "theta", "lr")
BOOL_FIELDS = ("hinge", "use_meta_path")


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass
class TrainConfig:
    """训练配置（所有字段都有默认值，面向桌面规模）"""
    gamma: float = 1.0                  # margin
    alpha: float = 0.5                  # 蒸馏损失权重
    alpha_per_kg: Dict[str, float] = field(default_factory=dict)  # 按 KG 覆盖 alpha
    theta: float = 0.1                  # 性能门控宽度（MRR 单位）
    top_k: int = 10                     # 蒸馏候选数
    neg_samples: int = 16               # 每个正例的负例数
    lr: float = 1e-3
    dim: int = 32
    layers: int = 1
    score_fn: str = "transe_l1"
    composition: str = "sub"
    activation: str = "tanh"
    hinge: bool = True                  # False 时使用原始差值形式的损失
    fused_message: str = "augmented"    # plain 即 KGC-C 消融
    use_meta_path: bool = False
    epochs_stage1: int = 100
    epochs_stage2: int = 50
    batch_size: int = 128
    seed: int = 0
    eval_every: int = 5                 # 验证 MRR 刷新间隔（epoch）
    patience: int = 10                  # 早停耐心（以评估次数计）
    filter_mode: str = "traditional"
    eval_tasks: Tuple[str, ...] = ("tail",)
    max_resample: int = 100
    dtype: str = "float64"

    def __post_init__(self):
        self.eval_tasks = tuple(self.eval_tasks)
        self.alpha_per_kg = dict(self.alpha_per_kg)
        self.validate()

    def validate(self):
        """检查数值范围和枚举取值"""
        self._check_types()
        checks = [
            (self.gamma > 0, "gamma 必须 > 0"),
            (self.alpha >= 0, "alpha 必须 >= 0"),
            (all(v >= 0 for v in self.alpha_per_kg.values()), "alpha_per_kg 取值必须 >= 0"),
            (self.theta >= 0, "theta 必须 >= 0"),
            (self.top_k >= 1, "top_k 必须 >= 1"),
            (self.neg_samples >= 1, "neg_samples 必须 >= 1"),
            (self.lr > 0, "lr 必须 > 0"),
            (self.dim >= 1, "dim 必须 >= 1"),
            (self.layers >= 1, "layers 必须 >= 1"),
            (self.epochs_stage1 >= 0 and self.epochs_stage2 >= 0, "epoch 数不能为负"),
            (self.batch_size >= 1, "batch_size 必须 >= 1"),
            (self.seed >= 0, "seed 必须 >= 0"),
            (self.eval_every >= 1, "eval_every 必须 >= 1"),
            (self.patience >= 1, "patience 必须 >= 1"),
            (self.max_resample >= 1, "max_resample 必须 >= 1"),
            (self.score_fn in SCORE_FNS, f"score_fn 必须是 {SCORE_FNS} 之一"),
            (self.composition in COMPOSITIONS, f"composition 必须是 {COMPOSITIONS} 之一"),
            (self.activation in ACTIVATIONS, f"activation 必须是 {ACTIVATIONS} 之一"),
            (self.fused_message in FUSED_MESSAGES, f"fused_message 必须是 {FUSED_MESSAGES} 之一"),
            (self.filter_mode in FILTER_MODES, f"filter_mode 必须是 {FILTER_MODES} 之一"),
            (len(self.eval_tasks) > 0 and all(t in TASKS for t in self.eval_tasks),
             f"eval_tasks 必须是 {TASKS} 的非空子集"),
            (self.dtype in DTYPES, f"dtype 必须是 {DTYPES} 之一"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(f"训练配置无效: {message}")

    def _check_types(self):
        for name in INT_FIELDS:
            if not _is_int(getattr(self, name)):
                raise ConfigError(f"训练配置无效: {name} 必须是整数，得到 {getattr(self, name)!r}")
        for name in FLOAT_FIELDS:
            if not _is_real(getattr(self, name)):
                raise ConfigError(f"训练配置无效: {name} 必须是数值，得到 {getattr(self, name)!r}")
        for name in BOOL_FIELDS:
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"训练配置无效: {name} 必须是布尔值，得到 {getattr(self, name)!r}")
        if not isinstance(self.alpha_per_kg, dict) or not all(_is_real(v) for v in self.alpha_per_kg.values()):
            raise ConfigError("训练配置无效: alpha_per_kg 必须是 KG 名称到数值的映射")

    def alpha_for(self, kg_name: str) -> float:
        """某个 KG 使用的蒸馏权重"""
        return self.alpha_per_kg.get(kg_name, self.alpha)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["eval_tasks"] = list(self.eval_tasks)
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "TrainConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"训练配置包含未知字段: {unknown}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"训练配置无效: {e}") from e


@dataclass
class KgEntry:
    """清单中的单个 KG 条目"""
    name: str
    train: Path
    valid: Path
    test: Path
    entities: Optional[Path] = None         # 可选：按 id 顺序的实体词表
    relations: Optional[Path] = None        # 可选：按 id 顺序的关系词表
    entity_count_hint: Optional[int] = None


@dataclass
class AlignmentEntry:
    """清单中的对齐文件条目"""
    kgs: Tuple[str, str]
    path: Path


@dataclass
class DatasetManifest:
    """数据集清单"""
    name: str
    kgs: List[KgEntry]
    alignments: List[AlignmentEntry] = field(default_factory=list)
    shared_relation_schema: bool = False
    source: Optional[Path] = None           # 清单文件路径

    def __post_init__(self):
        self.validate()

    def validate(self):
        names = [kg.name for kg in self.kgs]
        if not names:
            raise ConfigError("清单中没有 KG")
        if len(set(names)) != len(names):
            raise ConfigError(f"清单中 KG 名称重复: {names}")
        for entry in self.alignments:
            for kg_name in entry.kgs:
                if kg_name not in names:
                    raise ConfigError(f"对齐文件 {entry.path} 引用了未声明的 KG: {kg_name}")
            if entry.kgs[0] == entry.kgs[1]:
                raise ConfigError(f"对齐文件 {entry.path} 两端是同一个 KG: {entry.kgs[0]}")

    def kg_index(self, name: str) -> int:
        return [kg.name for kg in self.kgs].index(name)


@dataclass(frozen=True)
class SamplingSpec:
    """悬空实体采样参数"""
    alignment_keep_fraction: float
    seed: int = 0
    removal_side: str = "right"     # 被移除对齐的哪一侧实体连同三元组一起移除

    def __post_init__(self):
        if not 0.0 < self.alignment_keep_fraction <= 1.0:
            raise ConfigError(f"alignment_keep_fraction 必须在 (0, 1] 内: {self.alignment_keep_fraction}")
        if self.removal_side not in ("left", "right"):
            raise ConfigError(f"removal_side 必须是 left 或 right: {self.removal_side}")


@dataclass
class RunConfig:
    """一次命令行运行的配置"""
    manifest: Optional[Path] = None
    train_config: Optional[Path] = None
    out_dir: Optional[Path] = None
    flags: Dict[str, Any] = field(default_factory=dict)     # 子命令专属参数

    def prepare_out_dir(self) -> Path:
        """创建输出目录"""
        if self.out_dir is None:
            raise ConfigError("缺少输出目录 --out")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir
