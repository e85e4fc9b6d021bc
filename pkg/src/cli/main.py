"""
命令行入口

退出码：0 成功，1 用法/配置错误，2 数据完整性错误，3 数值错误
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

import torch

from ..errors import KgcError, UsageError
from ..kg import DEFAULT_COMPONENT_THRESHOLD
from ..logs import setup_logging
from ..models.config import FILTER_MODES
from . import commands

logger = logging.getLogger(__name__)

DESCRIPTION = """多知识图谱补全：CompGCN 编码器 + 融合图 + 互蒸馏。

文件格式：
  清单 (YAML)   name / shared_relation_schema / kgs[{name, train, valid, test,
                entities?, relations?, entity_count_hint?}] / alignments[{kgs, path}]
  三元组 (TSV)  head<TAB>relation<TAB>tail，UTF-8，无表头
  对齐 (TSV)    left_entity<TAB>right_entity
  训练配置      YAML 平铺键，未列出的字段取默认值
  metrics.tsv   epoch<TAB>model<TAB>loss_T<TAB>loss_D<TAB>val_mrr
"""


class _ArgumentParser(argparse.ArgumentParser):
    """用法错误抛出 UsageError，而不是直接退出"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_run_args(p: argparse.ArgumentParser):
    p.add_argument("--run", required=True, help="train 生成的运行目录")
    p.add_argument("--stage", choices=commands.STAGES, default="stage2", help="使用哪个阶段的检查点")
    p.add_argument("--manifest", help="数据集清单（默认使用运行目录中的副本）")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="ckgc_ckd", description=DESCRIPTION,
                             formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--threads", type=int, default=None, help="工作线程数上限（默认 CPU 核数）")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="输出调试日志")
    parser.add_argument("-q", "--quiet", action="count", default=0, help="只输出警告和错误")
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    p = sub.add_parser("train", help="两阶段训练并生成消融报告")
    p.add_argument("--manifest", required=True, help="数据集清单 (YAML)")
    p.add_argument("--config", help="训练配置 (YAML)，缺省使用默认配置")
    p.add_argument("--out", required=True, help="运行目录")
    p.add_argument("--stage1-only", action="store_true", help="只执行第一阶段")
    p.add_argument("--dump-ranks", action="store_true", help="写出逐查询排名 ranks.tsv")
    p.set_defaults(handler=commands.cmd_train)

    p = sub.add_parser("evaluate", help="评估运行目录中的检查点")
    _add_run_args(p)
    p.add_argument("--model", choices=commands.MODEL_CHOICES, default="all")
    p.add_argument("--filter", choices=FILTER_MODES, help="过滤模式（默认取训练配置）")
    p.add_argument("--tasks", help="逗号分隔的任务，如 tail 或 head,tail")
    p.add_argument("--split", choices=("valid", "test"), default="test")
    p.add_argument("--out", help="报告目录（默认 RUN/eval/STAGE）")
    p.add_argument("--dump-ranks", action="store_true", help="写出逐查询排名 ranks.tsv")
    p.set_defaults(handler=commands.cmd_evaluate)

    p = sub.add_parser("augment", help="元路径增强（参数交换 + 对齐传递）")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=commands.cmd_augment)

    p = sub.add_parser("diagnose", help="对齐连通分量诊断")
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=int, default=DEFAULT_COMPONENT_THRESHOLD)
    p.add_argument("--out", help="写出 CSV 的路径")
    p.set_defaults(handler=commands.cmd_diagnose)

    p = sub.add_parser("export-corr", help="导出关系嵌入相关矩阵 CSV")
    _add_run_args(p)
    p.add_argument("--model", required=True, help="KG 名称或 fused")
    p.add_argument("--out", required=True, help="CSV 路径")
    p.set_defaults(handler=commands.cmd_export_correlation)

    p = sub.add_parser("sample", help="悬空实体采样")
    p.add_argument("--manifest", required=True)
    p.add_argument("--keep-fraction", type=float, required=True, help="保留的对齐比例 (0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--removal-side", choices=("left", "right"), default="right")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=commands.cmd_sample)

    p = sub.add_parser("synth", help="生成合成互补数据集")
    p.add_argument("--entities", type=int, default=200)
    p.add_argument("--relations", type=int, default=20)
    p.add_argument("--triples", type=int, default=1500)
    p.add_argument("--kgs", type=int, default=2)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--removal", type=float, default=0.3)
    p.add_argument("--removal-mode", choices=("entity", "triple"), default="entity",
                   help="entity: 按焦点实体移除; triple: 均匀随机移除")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=commands.cmd_synth)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """解析参数并执行子命令，返回退出码"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            raise UsageError("缺少子命令，使用 --help 查看用法")
        if args.threads is not None and args.threads < 1:
            raise UsageError(f"--threads 必须 >= 1: {args.threads}")
    except UsageError as e:
        setup_logging(0)
        parser.print_usage(sys.stderr)
        logger.error("%s", e)
        return e.exit_code

    setup_logging(args.verbose - args.quiet)
    args.threads = args.threads or os.cpu_count() or 1
    torch.set_num_threads(args.threads)
    try:
        return args.handler(args)
    except KgcError as e:
        logger.error("%s", e)
        return e.exit_code
