"""
对齐图诊断

把所有对齐连成一张无向图，统计连通分量大小，标记过大的分量。
过大的分量通常意味着对齐标注有噪声，或单个 KG 内存在重复实体。
"""
import logging
from collections import Counter

import networkx as nx

from ..models import AlignmentComponentReport, MultiKgStore
from .meta_path import alignment_graph

logger = logging.getLogger(__name__)

DEFAULT_COMPONENT_THRESHOLD = 50


def alignment_component_report(store: MultiKgStore,
                               threshold: int = DEFAULT_COMPONENT_THRESHOLD) -> AlignmentComponentReport:
    """连通分量大小直方图以及超过阈值的分量"""
    graph = alignment_graph(store.alignments)
    components = sorted((sorted(c) for c in nx.connected_components(graph)),
                        key=lambda c: (-len(c), c[0]))
    sizes = [len(c) for c in components]
    histogram = dict(sorted(Counter(sizes).items()))
    flagged = [c for c in components if len(c) > threshold]
    same_kg = sum(1 for c in components if len({ref.kg_id for ref in c}) < len(c))

    for component in flagged:
        logger.warning("对齐连通分量过大: %d 个实体（阈值 %d），起始实体 %s",
                       len(component), threshold, component[0])
    return AlignmentComponentReport(
        histogram=histogram,
        flagged=flagged,
        threshold=threshold,
        same_kg_components=same_kg,
        component_sizes=sizes,
    )
