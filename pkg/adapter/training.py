"""
Stage 3: instruction-based adaptation. Soft prompts from the bridge are
prepended to instruction and code; only bridge parameters are optimized
while the decoder stays frozen.
"""
from dataclasses import dataclass

import numpy as np
import torch
from loguru import logger

from adapter.prompt import answer_positions, code_room, compose_input, stage3_batch_loss, truncate_code
from bridge.model import Bridge, project_soft_prompt
from bridge.training import encode_for_bridge
from config.settings import TASK_INSTRUCTIONS
from utils.exceptions import DegenerateInput, FrozenViolation
from utils.training import (
    EarlyStopping, LossTrace, WarmupPlateauSchedule, build_optimizer, check_finite,
    minibatches, snapshot, warmup_steps_for,
)


@dataclass(frozen=True)
class TaskExample:
    graph: object
    answer: str


@dataclass
class Stage3Result:
    bridge: Bridge
    trace: LossTrace
    decoder_checksum: str


def soft_prompts(bridge: Bridge, encoder, graphs) -> torch.Tensor:
    """B x N_q x d_llm soft prompts for a list of featured graphs"""
    encoding = encode_for_bridge(encoder, graphs)
    memory, memory_mask = bridge.graph_memory(encoding, len(graphs))
    return project_soft_prompt(bridge.query_forward(memory, memory_mask), bridge)


def stage3_examples_loss(bridge, encoder, decoder, examples, instruction: str) -> torch.Tensor:
    prompts = soft_prompts(bridge, encoder, [ex.graph for ex in examples])
    composed = []
    for i, ex in enumerate(examples):
        room = code_room(prompts[i], instruction, decoder, reserved=answer_positions(ex.answer))
        code = truncate_code(ex.graph.graph.code, room)
        composed.append(compose_input(prompts[i], instruction, code, decoder, answer=ex.answer))
    return stage3_batch_loss(composed, decoder)


def train_stage3(examples, config, seed: int, bridge: Bridge, encoder, decoder) -> Stage3Result:
    if not examples:
        raise DegenerateInput("stage 3 needs at least one task example")
    torch.manual_seed(seed)
    instruction = TASK_INSTRUCTIONS[config["stage3.task"]]
    checksum = decoder.freeze()
    for param in encoder.parameters():
        param.requires_grad_(False)

    optimizer = build_optimizer(bridge.parameters(), config["stage3.lr"], config["stage3.weight_decay"])
    batches_per_epoch = -(-len(examples) // config["stage3.batch_size"])
    schedule = WarmupPlateauSchedule(
        optimizer, config["stage3.lr"],
        warmup_steps_for(config["stage3.warmup_ratio"], config["stage3.epochs"], batches_per_epoch),
        patience=config["stage3.scheduler_patience"], factor=config["stage3.scheduler_factor"],
        min_lr=config["stage3.min_lr"],
    )
    stopper = EarlyStopping(config["stage3.patience"])
    trace = LossTrace()
    best = snapshot(bridge)
    rng = np.random.default_rng(seed)

    logger.info(f"stage 3: {len(examples)} examples, task {config['stage3.task']}")
    for epoch in range(config["stage3.epochs"]):
        bridge.train()
        losses = []
        for b, indices in enumerate(minibatches(len(examples), config["stage3.batch_size"], rng)):
            loss = stage3_examples_loss(bridge, encoder, decoder, [examples[i] for i in indices], instruction)
            check_finite(loss, f"epoch {epoch} batch {b}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            schedule.step_batch()
            losses.append(loss.item())

        mean = float(np.mean(losses))
        trace.record(epoch, nll=mean, lr=schedule.lr)
        schedule.step_epoch(mean)
        stop = stopper.update(mean, epoch)
        if stopper.improved_last:
            best = snapshot(bridge)
        if stop:
            trace.stopped_early = True
            logger.info(f"stage 3 stopped early at epoch {epoch}")
            break

    if decoder.checksum() != checksum:
        raise FrozenViolation("decoder parameters changed during stage 3")
    bridge.load_state_dict(best)
    trace.best_epoch = stopper.best_epoch
    return Stage3Result(bridge=bridge, trace=trace, decoder_checksum=checksum)


def evaluate_nll(bridge, encoder, decoder, examples, instruction: str) -> float:
    """Mean per-example answer NLL without updating anything"""
    bridge.eval()
    with torch.no_grad():
        return float(stage3_examples_loss(bridge, encoder, decoder, examples, instruction))
