"""
两阶段训练

第一阶段：每个个体模型 M_i 和融合模型 M_f 只用 margin 损失独立训练，按验证 MRR 早停。
第二阶段：每个外层 step 先对融合图取一批计算 L^f_T；再对每个 KG_i 取一批计算 L^i_T
和双向蒸馏损失，立即更新 M_i；最后把 α_i · L^f_D,i 累加进 L^f 并更新一次 M_f。
门控 MRR 每 eval_every 个 epoch 刷新一次。每个阶段使用新的 Adam 状态。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import torch
from tqdm import tqdm

from ..encoder import (
    EncodedGraph, KgcModel, build_fused_graph, build_kg_graph, encode, encode_fused, score_triples,
)
from ..errors import ConfigError
from ..evaluation import evaluate, fused_scorers, individual_scorers
from ..kg import alignment_closure, augment_store, build_fused_kg, parameter_swap_triples
from ..models import GateState, MultiKgStore, TrainConfig
from .distillation import mutual_distillation
from .gate import update_gate
from .losses import margin_loss
from .metrics_log import MetricsLog, fused_from
from .negatives import NegativeSampler
from .optim import grad_step, make_optimizer

logger = logging.getLogger(__name__)

FUSED_MODEL = "fused"


@dataclass
class TrainedModels:
    """训练得到的全部模型"""
    store: MultiKgStore                                     # 实际训练所用的存储（可能经过增强）
    individual: Dict[str, KgcModel]
    fused: KgcModel
    history: Dict[str, List[float]] = field(default_factory=dict)      # 验证 MRR 历史
    gates: Dict[str, GateState] = field(default_factory=dict)
    gate_history: List[Tuple[int, str, GateState]] = field(default_factory=list)  # (epoch, kg, 该 epoch 生效的门控)
    best_epochs: Dict[str, int] = field(default_factory=dict)         # 第二阶段恢复到的 epoch（全局编号）

    def all_models(self) -> Dict[str, KgcModel]:
        return {**self.individual, FUSED_MODEL: self.fused}


class _EarlyStopper:
    """记录最佳验证 MRR 对应的参数，连续 patience 次评估没有提升时停止"""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -math.inf
        self.state: Optional[Dict[str, torch.Tensor]] = None
        self.bad = 0
        self.best_epoch: Optional[int] = None

    @property
    def exhausted(self) -> bool:
        return self.bad >= self.patience

    def update(self, mrr: float, model: KgcModel, epoch: Optional[int] = None) -> bool:
        if self.state is None or mrr > self.best:
            self.best = mrr
            self.best_epoch = epoch
            self.state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            self.bad = 0
        else:
            self.bad += 1
        return self.exhausted

    def restore(self, model: KgcModel):
        if self.state is not None:
            model.load_state_dict(self.state)


def augment_for_training(store: MultiKgStore) -> MultiKgStore:
    """元路径增强：对齐传递闭包，共享关系模式下再做参数交换（只推导一次）"""
    triples = parameter_swap_triples(store) if store.shared_relation_schema else set()
    closure = alignment_closure(store)
    logger.info("元路径增强: 新增 %d 个训练三元组, %d 个对齐", len(triples), len(closure))
    return augment_store(store, triples, closure)


def _mean(values: List[float]) -> Optional[float]:
    return math.fsum(values) / len(values) if values else None


class MultiKgTrainer:
    """多 KG 两阶段训练器"""

    def __init__(self, store: MultiKgStore, config: TrainConfig, metrics: Optional[MetricsLog] = None,
                 threads: Optional[int] = None, augment: bool = True):
        config.validate()
        if augment and config.use_meta_path:
            store = augment_for_training(store)
        self.store = store
        self.config = config
        self.threads = threads
        self.metrics = metrics if metrics is not None else MetricsLog()

        self.fused_kg = build_fused_kg(store)
        store.fused = self.fused_kg
        self.graphs = {kg.name: build_kg_graph(kg) for kg in store.kgs}
        self.fused_graph = build_fused_graph(self.fused_kg, config.fused_message)
        self.samplers = {kg.name: NegativeSampler.for_kg(kg, config.max_resample) for kg in store.kgs}
        offsets = np.asarray(self.fused_kg.entity_offset, dtype=np.int64)
        owner = self.fused_kg.triple_kg
        self.fused_sampler = NegativeSampler(
            self.fused_kg.triples, self.fused_kg.num_entities, self.fused_kg.num_relations,
            entity_low=offsets[owner], entity_high=offsets[owner + 1], max_resample=config.max_resample)

        smallest = min(kg.num_entities for kg in store.kgs)
        if config.top_k > smallest:
            raise ConfigError(f"top_k={config.top_k} 超过最小实体词表大小 {smallest}")

    @property
    def fused_label(self) -> str:
        return "KGC-A" if self.config.fused_message == "augmented" else "KGC-C"

    def init_models(self) -> TrainedModels:
        """按种子初始化 M_1..M_m 和 M_f"""
        cfg = self.config
        seeds = np.random.SeedSequence(cfg.seed).generate_state(self.store.num_kgs + 1)
        individual = {
            kg.name: KgcModel.from_config(cfg, kg.num_entities, kg.num_relations,
                                          seed=int(seeds[kg.kg_id]), name=kg.name)
            for kg in self.store.kgs
        }
        fused = KgcModel.from_config(cfg, self.fused_kg.num_entities, self.fused_kg.num_relations,
                                     with_align=cfg.fused_message == "augmented",
                                     seed=int(seeds[-1]), name=FUSED_MODEL)
        return TrainedModels(store=self.store, individual=individual, fused=fused)

    # ------------------------------------------------------------------ 编码与损失

    def encode_individual(self, name: str, model: KgcModel) -> EncodedGraph:
        return encode(model, self.graphs[name])

    def encode_fused(self, model: KgcModel) -> EncodedGraph:
        if model.with_align:
            return encode_fused(model, self.fused_graph)
        return encode(model, self.fused_graph)

    def representation_loss(self, enc: EncodedGraph, sampler: NegativeSampler, triples: np.ndarray,
                            index: np.ndarray, rng: np.random.Generator) -> torch.Tensor:
        """一批正例与其负例上的 margin 损失 L_T"""
        cfg = self.config
        neg, _ = sampler.sample(triples, rng, cfg.neg_samples, index=index)
        pos_score = score_triples(cfg.score_fn, enc, triples[:, 0], triples[:, 1], triples[:, 2])
        neg_score = score_triples(cfg.score_fn, enc, neg[..., 0], neg[..., 1], neg[..., 2])
        return margin_loss(pos_score, neg_score, cfg.gamma, hinge=cfg.hinge)

    # ------------------------------------------------------------------ 验证

    def validate_individual(self, name: str, model: KgcModel) -> float:
        cfg = self.config
        scorers = individual_scorers({name: model}, self.store, {name: self.graphs[name]})
        report = evaluate(scorers, self.store, "valid", cfg.filter_mode, cfg.eval_tasks, self.threads)
        return report.per_kg[name].mrr

    def validate_fused(self, model: KgcModel) -> Dict[str, float]:
        """M_f 在每个 KG 验证集上的 MRR"""
        cfg = self.config
        scorers = fused_scorers(model, self.store, self.fused_kg, self.fused_graph)
        report = evaluate(scorers, self.store, "valid", cfg.filter_mode, cfg.eval_tasks, self.threads)
        return {name: m.mrr for name, m in report.per_kg.items()}

    @staticmethod
    def _fused_score(per_kg: Dict[str, float]) -> float:
        return math.fsum(per_kg.values()) / len(per_kg) if per_kg else 0.0

    def _is_eval_epoch(self, epoch: int, total: int) -> bool:
        return epoch % self.config.eval_every == 0 or epoch == total

    # ------------------------------------------------------------------ 第一阶段

    def train_stage1(self, models: TrainedModels) -> TrainedModels:
        """每个模型只用 L_T 独立训练"""
        for kg in self.store.kgs:
            name = kg.name
            self._stage1_model(
                models.individual[name], name, kg.train, self.samplers[name],
                lambda m, n=name: self.encode_individual(n, m),
                lambda m, n=name: self.validate_individual(n, m),
                np.random.default_rng([self.config.seed, 1, kg.kg_id]),
                models.history.setdefault(name, []))
        self._stage1_model(
            models.fused, FUSED_MODEL, self.fused_kg.triples, self.fused_sampler,
            self.encode_fused,
            lambda m: self._fused_score(self.validate_fused(m)),
            np.random.default_rng([self.config.seed, 1, self.store.num_kgs]),
            models.history.setdefault(FUSED_MODEL, []))
        return models

    def _stage1_model(self, model: KgcModel, label: str, triples: np.ndarray, sampler: NegativeSampler,
                      encode_fn: Callable[[KgcModel], EncodedGraph], validate_fn: Callable[[KgcModel], float],
                      rng: np.random.Generator, history: List[float]):
        cfg = self.config
        optimizer = make_optimizer(model, cfg.lr)
        stopper = _EarlyStopper(cfg.patience)
        n = len(triples)
        for epoch in tqdm(range(1, cfg.epochs_stage1 + 1), desc=f"stage1 {label}", disable=None, leave=False):
            losses = []
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                enc = encode_fn(model)
                loss = self.representation_loss(enc, sampler, triples[idx], idx, rng)
                grad_step(model, loss, optimizer, label)
                losses.append(loss.item())
            mrr = None
            stop = False
            if self._is_eval_epoch(epoch, cfg.epochs_stage1):
                mrr = validate_fn(model)
                history.append(mrr)
                stop = stopper.update(mrr, model)
            self.metrics.record(epoch, label, _mean(losses), None, mrr)
            if stop:
                logger.info("%s 第一阶段在 epoch %d 早停（最佳验证 MRR %.4f）", label, epoch, stopper.best)
                break
        stopper.restore(model)

    # ------------------------------------------------------------------ 第二阶段

    def _refresh_gates(self, models: TrainedModels, individual: Dict[str, float],
                       fused: Dict[str, float]):
        for kg in self.store.kgs:
            state = GateState(mrr_individual=individual[kg.name], mrr_fused_on_kg=fused.get(kg.name, 0.0))
            gate = update_gate(state, self.config.theta)
            old = models.gates.get(kg.name)
            if old is None or (old.teach_i_to_f, old.teach_f_to_i) != (gate.teach_i_to_f, gate.teach_f_to_i):
                logger.info("门控 %s: MRR_i=%.4f MRR_f=%.4f, %s->fused=%s, fused->%s=%s",
                            kg.name, gate.mrr_individual, gate.mrr_fused_on_kg,
                            kg.name, gate.teach_i_to_f, kg.name, gate.teach_f_to_i)
            models.gates[kg.name] = gate

    def _validate_all(self, models: TrainedModels) -> Tuple[Dict[str, float], Dict[str, float]]:
        individual = {kg.name: self.validate_individual(kg.name, models.individual[kg.name])
                      for kg in self.store.kgs}
        return individual, self.validate_fused(models.fused)

    def train_stage2(self, models: TrainedModels) -> TrainedModels:
        """带互蒸馏的联合训练"""
        cfg = self.config
        if cfg.epochs_stage2 <= 0:
            return models
        kgs = self.store.kgs
        rng = np.random.default_rng([cfg.seed, 2])
        optimizers = {kg.name: make_optimizer(models.individual[kg.name], cfg.lr) for kg in kgs}
        fused_optimizer = make_optimizer(models.fused, cfg.lr)
        stoppers = {name: _EarlyStopper(cfg.patience) for name in models.all_models()}

        # 第一阶段的结果只用来初始化门控，最佳状态只在第二阶段的评估中挑选
        individual_mrr, fused_mrr = self._validate_all(models)
        self._refresh_gates(models, individual_mrr, fused_mrr)

        triples_f = self.fused_kg.triples
        n_f = len(triples_f)
        bs = cfg.batch_size
        steps = math.ceil(n_f / bs)
        fn = cfg.score_fn
        for epoch in tqdm(range(1, cfg.epochs_stage2 + 1), desc="stage2", disable=None, leave=False):
            for kg in kgs:
                models.gate_history.append((cfg.epochs_stage1 + epoch, kg.name, models.gates[kg.name]))
            order_f = rng.permutation(n_f)
            orders = {kg.name: rng.permutation(len(kg.train)) for kg in kgs}
            loss_t: Dict[str, List[float]] = {name: [] for name in stoppers}
            loss_d: Dict[str, List[float]] = {name: [] for name in stoppers}
            loss_d_from: Dict[str, List[float]] = {kg.name: [] for kg in kgs}

            for step in range(steps):
                idx_f = order_f[step * bs:(step + 1) * bs]
                enc_f = self.encode_fused(models.fused)
                loss_f_t = self.representation_loss(enc_f, self.fused_sampler, triples_f[idx_f], idx_f, rng)
                loss_f_d = enc_f.entity_out.new_zeros(())
                raw_f_d = 0.0
                for kg in kgs:
                    n_i = len(kg.train)
                    if n_i == 0:
                        continue
                    name = kg.name
                    model_i = models.individual[name]
                    idx_i = orders[name][(step * bs + np.arange(min(bs, n_i))) % n_i]
                    batch_i = kg.train[idx_i]
                    enc_i = self.encode_individual(name, model_i)
                    loss_i_t = self.representation_loss(enc_i, self.samplers[name], batch_i, idx_i, rng)
                    alpha = cfg.alpha_for(name)
                    if alpha > 0:
                        kd_i, kd_f = mutual_distillation(enc_i, enc_f, batch_i, kg.kg_id, self.fused_kg, fn,
                                                         cfg.top_k, models.gates[name])
                    else:
                        kd_i = kd_f = enc_i.entity_out.new_zeros(())
                    grad_step(model_i, loss_i_t + alpha * kd_i, optimizers[name], name)
                    loss_f_d = loss_f_d + alpha * kd_f
                    loss_t[name].append(loss_i_t.item())
                    loss_d[name].append(kd_i.item())
                    loss_d_from[name].append(kd_f.item())
                    raw_f_d += kd_f.item()
                grad_step(models.fused, loss_f_t + loss_f_d, fused_optimizer, FUSED_MODEL)
                loss_t[FUSED_MODEL].append(loss_f_t.item())
                loss_d[FUSED_MODEL].append(raw_f_d)

            val: Dict[str, Optional[float]] = {name: None for name in stoppers}
            stop = False
            if self._is_eval_epoch(epoch, cfg.epochs_stage2):
                individual_mrr, fused_mrr = self._validate_all(models)
                self._refresh_gates(models, individual_mrr, fused_mrr)
                stop = self._update_stoppers(models, stoppers, individual_mrr, fused_mrr, cfg.epochs_stage1 + epoch)
                val.update(individual_mrr)
                val[FUSED_MODEL] = self._fused_score(fused_mrr)
                for name, mrr in val.items():
                    models.history.setdefault(name, []).append(mrr)

            logged_epoch = cfg.epochs_stage1 + epoch
            for kg in kgs:
                self.metrics.record(logged_epoch, kg.name, _mean(loss_t[kg.name]), _mean(loss_d[kg.name]),
                                    val[kg.name])
            self.metrics.record(logged_epoch, FUSED_MODEL, _mean(loss_t[FUSED_MODEL]),
                                _mean(loss_d[FUSED_MODEL]), val[FUSED_MODEL])
            for kg in kgs:
                self.metrics.record(logged_epoch, fused_from(kg.name), None, _mean(loss_d_from[kg.name]), None)
            if stop:
                logger.info("第二阶段在 epoch %d 早停", epoch)
                break

        for name, model in models.all_models().items():
            stoppers[name].restore(model)
            models.best_epochs[name] = stoppers[name].best_epoch
            logger.info("%s 第二阶段恢复到 epoch %d 的最佳状态（验证 MRR %.4f）",
                        name, stoppers[name].best_epoch, stoppers[name].best)
        return models

    def _update_stoppers(self, models: TrainedModels, stoppers: Dict[str, _EarlyStopper],
                         individual: Dict[str, float], fused: Dict[str, float], epoch: int) -> bool:
        """更新每个模型的最佳状态，全部模型都耗尽耐心时返回 True"""
        for name, model in models.individual.items():
            stoppers[name].update(individual[name], model, epoch)
        stoppers[FUSED_MODEL].update(self._fused_score(fused), models.fused, epoch)
        return all(s.exhausted for s in stoppers.values())


def train_stage1(store: MultiKgStore, config: TrainConfig, metrics: Optional[MetricsLog] = None,
                 threads: Optional[int] = None) -> TrainedModels:
    """初始化并完成第一阶段训练"""
    trainer = MultiKgTrainer(store, config, metrics, threads)
    return trainer.train_stage1(trainer.init_models())


def train_stage2(models: TrainedModels, config: TrainConfig, metrics: Optional[MetricsLog] = None,
                 threads: Optional[int] = None) -> TrainedModels:
    """在第一阶段模型上继续第二阶段训练（使用 models.store，不再重复增强）"""
    trainer = MultiKgTrainer(models.store, config, metrics, threads, augment=False)
    return trainer.train_stage2(models)
