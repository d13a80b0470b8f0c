from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .core import ChainState, PartitionedTarget, ProposalKernel, mh_transition
from .errors import ConfigurationError, NumericalError
from .traces import RunTrace, TraceConfig, TraceRecorder
from .updates import (
    DesiredFrequencies,
    ScheduleState,
    UpdateRule,
    deterministic_gamma,
    fh_met,
    fh_threshold_is_degenerate,
)

if TYPE_CHECKING:
    from .experiment import ExperimentConfig

logger = logging.getLogger(__name__)

RECENTER_EVERY = 10_000

Seed = int | np.random.SeedSequence


def run_wl_deterministic(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    rule: UpdateRule,
    phi: Sequence[float],
    alpha: float,
    iterations: int,
    seed: Seed,
    trace: TraceConfig | None = None,
    x0: float | None = None,
    label: str = "",
) -> RunTrace:
    """Wang-Landau with gamma_t = t^{-alpha} applied after every draw."""
    deterministic_gamma(1, alpha)
    return _run(target, proposal, rule, phi, iterations, seed, trace, x0, label, alpha=alpha)


def run_wl_fh(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    rule: UpdateRule,
    phi: Sequence[float],
    gamma0: float,
    gamma_decay: float,
    c: float,
    iterations: int,
    seed: Seed,
    trace: TraceConfig | None = None,
    x0: float | None = None,
    c_decay: float = 1.0,
    kappa_max: int | None = None,
    min_sweep: int = 1,
    label: str = "",
) -> RunTrace:
    """Wang-Landau whose gamma only decreases when the flat-histogram criterion is met.

    Each iteration draws from K_theta, counts the visit, checks FH (resetting the counters and
    moving to gamma_{kappa+1} when it holds) and then updates the penalties with the current gamma.
    """
    schedule = ScheduleState.start(
        target.d,
        gamma0=gamma0,
        gamma_decay=gamma_decay,
        c=c,
        c_decay=c_decay,
        kappa_max=kappa_max,
        min_sweep=min_sweep,
    )
    if min_sweep == 1 and fh_threshold_is_degenerate(phi, c):
        logger.warning("FH threshold c=%s can be met after a single visit since reset", c)
    return _run(target, proposal, rule, phi, iterations, seed, trace, x0, label, schedule=schedule)


def _run(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    rule: UpdateRule,
    phi: Sequence[float],
    iterations: int,
    seed: Seed,
    trace: TraceConfig | None,
    x0: float | None,
    label: str,
    alpha: float | None = None,
    schedule: ScheduleState | None = None,
) -> RunTrace:
    if int(iterations) < 1:
        raise ConfigurationError(f"Number of iterations must be at least 1, got {iterations}", field="iterations")
    phi = DesiredFrequencies(tuple(phi)).phi
    d = target.d
    if len(phi) != d:
        raise ConfigurationError(f"phi has {len(phi)} entries but the target has {d} bins", field="phi")
    if x0 is None:
        lo, hi = target.support
        x0 = 0.5 * (lo + hi)

    rng = np.random.default_rng(seed)
    state = ChainState.at(target, x0)
    log_theta = [-math.log(d)] * d
    visits = [0] * d
    gamma = schedule.gamma if schedule is not None else deterministic_gamma(1, alpha)
    hit, miss = rule.increments(phi, gamma)
    kappa = 0
    pending_flag = 0

    with TraceRecorder(d, iterations, trace, label=label) as recorder:
        for t in range(1, iterations + 1):
            state = mh_transition(target, proposal, log_theta, state, rng)
            current = state.bin - 1
            visits[current] += 1
            if schedule is None:
                gamma = deterministic_gamma(t, alpha)
                hit, miss = rule.increments(phi, gamma)
            else:
                schedule.record_visit(state.bin)
                if schedule.t_since_reset >= schedule.min_sweep and fh_met(schedule, phi):
                    kappa, t_global, gamma_before, gamma_after = schedule.flat_histogram_reached(t)
                    recorder.add_fh_event(kappa, t_global, gamma_before, gamma_after)
                    logger.debug("%s FH #%d at t=%d, gamma %.6g -> %.6g", label, kappa, t, gamma_before, gamma_after)
                    pending_flag = 1
                    if gamma_after != gamma:
                        gamma = gamma_after
                        hit, miss = rule.increments(phi, gamma)
            log_theta = [value + (hit[i] if i == current else miss[i]) for i, value in enumerate(log_theta)]

            if t % RECENTER_EVERY == 0:
                _ensure_finite(log_theta, t, label)
                mean = math.fsum(log_theta) / d
                log_theta = [value - mean for value in log_theta]
            if recorder.due(t):
                _ensure_finite(log_theta, t, label)
                recorder.record(t, state.bin, gamma, kappa, pending_flag, visits, log_theta, x=state.x)
                pending_flag = 0

        return recorder.build(final_log_theta=log_theta)


def _ensure_finite(log_theta: Sequence[float], t: int, label: str) -> None:
    if not all(math.isfinite(value) for value in log_theta):
        raise NumericalError(f"{label or 'run'}: penalties became non-finite at iteration {t}")


def replica_seed(master_seed: int, replica: int) -> np.random.SeedSequence:
    """Replica k always gets the same stream, whatever the total number of replicas."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(replica,))


def run_configured(config: "ExperimentConfig", replica: int, trace: TraceConfig | None = None) -> RunTrace:
    target = config.build_target()
    proposal = config.build_proposal()
    rule = UpdateRule.from_name(config.rule)
    schedule = config.schedule
    label = f"replica_{replica}"
    seed = replica_seed(config.seed, replica)
    if schedule.kind == "deterministic":
        result = run_wl_deterministic(
            target, proposal, rule, config.phi, schedule.alpha, config.iterations, seed, trace, config.x0, label
        )
    else:
        result = run_wl_fh(
            target,
            proposal,
            rule,
            config.phi,
            gamma0=schedule.gamma0,
            gamma_decay=schedule.gamma_decay,
            c=schedule.c,
            iterations=config.iterations,
            seed=seed,
            trace=trace,
            x0=config.x0,
            c_decay=schedule.c_decay,
            kappa_max=schedule.kappa_max,
            min_sweep=schedule.min_sweep,
            label=label,
        )
    logger.info("%s finished: final frequencies %s, kappa=%d", label, np.round(result.final_frequencies(), 6), result.kappa)
    return result


def run_replicas(
    config: "ExperimentConfig",
    traces: Sequence[TraceConfig | None] | None = None,
    workers: int | None = None,
) -> list[RunTrace]:
    """Run every replica of ``config`` on a bounded process pool; results keep replica order."""
    trace_configs = list(traces) if traces is not None else [None] * config.replicas
    if len(trace_configs) != config.replicas:
        raise ConfigurationError("One trace configuration per replica is required", field="replicas")
    pool_size = min(config.replicas, workers or os.cpu_count() or 1)
    if pool_size <= 1:
        return [run_configured(config, k, trace_configs[k]) for k in range(config.replicas)]

    with ProcessPoolExecutor(max_workers=pool_size) as executor:
        futures = [executor.submit(run_configured, config, k, trace_configs[k]) for k in range(config.replicas)]
        return [future.result() for future in futures]
