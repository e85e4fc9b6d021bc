"""
训练配置解析器
"""
from pathlib import Path

import yaml

from ..errors import ConfigError
from ..models import TrainConfig


def load_train_config(file_path) -> TrainConfig:
    """读取 YAML 训练配置，缺失字段取默认值"""
    path = Path(file_path)
    if not path.is_file():
        raise ConfigError(f"训练配置文件不存在: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (yaml.YAMLError, UnicodeDecodeError) as e:
        raise ConfigError(f"训练配置不是合法的 UTF-8 YAML: {path}: {e}") from e
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"训练配置顶层必须是映射: {path}")
    return TrainConfig.from_dict(data)


def dump_train_config(config: TrainConfig, file_path) -> Path:
    """写出解析后的完整训练配置"""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(config.to_dict(), sort_keys=False), encoding="utf-8")
    return path
