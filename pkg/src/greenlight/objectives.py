"""Queue discharge model and the two cycle objectives.

f1 is the total residual congestion after every link consumes its green
time; f2 is the total red time across links, a proxy for waiting time.
Both are minimized by the optimizer. All functions here are pure.
"""

from __future__ import annotations

import math

from .core import IntersectionConfig, ObjectiveVector, QueueState, SignalPlan


def _check_dims(queue: QueueState, plan: SignalPlan) -> None:
    if queue.num_links != plan.num_links:
        raise ValueError(
            f"queue has {queue.num_links} links, plan serves {plan.num_links}"
        )


def discharge(
    queue: QueueState, plan: SignalPlan, cfg: IntersectionConfig
) -> QueueState:
    """Drain each link's queue at its class saturation rate for its green.

    Residual count per link and class is max(0, count - floor(rate * green)).
    Guidance padding does not discharge.
    """
    _check_dims(queue, plan)
    green_by_link = {l: g for l, g in plan.phases}
    motorized = []
    non_motorized = []
    for i in range(queue.num_links):
        g = green_by_link.get(i, 0)
        motorized.append(
            max(0, queue.motorized[i] - math.floor(cfg.sat_flow_motorized * g))
        )
        non_motorized.append(
            max(0, queue.non_motorized[i] - math.floor(cfg.sat_flow_non_motorized * g))
        )
    return QueueState(
        motorized=tuple(motorized),
        non_motorized=tuple(non_motorized),
        timestamp_ms=queue.timestamp_ms,
    )


def f1(updated_queue: QueueState) -> int:
    """Total vehicles (motorized + non-motorized) still queued across links."""
    return updated_queue.total()


def red_times(plan: SignalPlan, include_inter_green: bool = True) -> list[int]:
    """Per-link red seconds within one cycle.

    A link is red whenever it is not being served (green plus its guidance
    pads). With ``include_inter_green=False``, clearance intervals are not
    counted as red.
    """
    cycle = plan.cycle_length_s
    if not include_inter_green:
        cycle -= plan.num_links * plan.inter_green_s
    return [cycle - (g + 2 * plan.guidance_pad_s) for _, g in plan.phases]


def f2(plan: SignalPlan, include_inter_green: bool = True) -> int:
    """Total red time summed over links."""
    return sum(red_times(plan, include_inter_green=include_inter_green))


def evaluate(
    plan: SignalPlan,
    queue: QueueState,
    cfg: IntersectionConfig,
    queue_weighted_f2: bool = False,
    include_inter_green: bool = True,
) -> ObjectiveVector:
    """Evaluate one full cycle: (residual congestion, total red time).

    ``queue_weighted_f2`` weights each link's red time by its initial queue
    length instead of counting plain seconds; off by default.
    """
    _check_dims(queue, plan)
    residual = discharge(queue, plan, cfg)
    if queue_weighted_f2:
        reds = red_times(plan, include_inter_green=include_inter_green)
        weights = {
            l: queue.motorized[l] + queue.non_motorized[l] for l, _ in plan.phases
        }
        total_red = sum(r * weights[l] for r, (l, _) in zip(reds, plan.phases))
    else:
        total_red = f2(plan, include_inter_green=include_inter_green)
    return ObjectiveVector(f1=f1(residual), f2=total_red)
