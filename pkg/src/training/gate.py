"""
性能门控：表现更好的模型总是可以做老师；较差的模型只有在验证 MRR 差距小于 θ 时
才可以做老师；MRR 相等时双方都可以做老师。
"""
import dataclasses

from ..models import GateState


def update_gate(state: GateState, theta: float) -> GateState:
    mrr_i, mrr_f = state.mrr_individual, state.mrr_fused_on_kg
    if mrr_i == mrr_f:
        return dataclasses.replace(state, teach_i_to_f=True, teach_f_to_i=True)
    close = abs(mrr_i - mrr_f) < theta
    if mrr_f > mrr_i:
        return dataclasses.replace(state, teach_f_to_i=True, teach_i_to_f=close)
    return dataclasses.replace(state, teach_i_to_f=True, teach_f_to_i=close)
