"""
Stage 1: self-supervised pretraining of the code graph encoder with a
weighted sum of graph contrastive learning and edge-type prediction
"""
from dataclasses import dataclass

import numpy as np
import torch
from loguru import logger

from cge.augment import augment_view
from cge.losses import batch_edge_type_loss, graph_contrastive_loss, has_edge_pairs
from cge.model import CodeGraphEncoder, GraphBatch
from utils.exceptions import DegenerateInput
from utils.seeding import derive_seed
from utils.training import (
    EarlyStopping, LossTrace, build_optimizer, check_finite, minibatches, snapshot,
)


@dataclass
class Stage1Loss:
    total: torch.Tensor
    contrastive: torch.Tensor
    edge: torch.Tensor
    edge_accuracy: float


@dataclass
class Stage1Result:
    model: CodeGraphEncoder
    trace: LossTrace


def stage1_loss(model: CodeGraphEncoder, graphs, config, seed: int) -> Stage1Loss:
    """
    Combined objective on one batch: two augmented views feed the contrastive
    term on pooled embeddings, the unaugmented graphs feed edge-type prediction
    """
    dtype = next(model.parameters()).dtype
    views = [
        [
            augment_view(fg, config["cge.node_drop"], config["cge.edge_drop"], derive_seed(seed, i, view))
            for i, fg in enumerate(graphs)
        ]
        for view in (1, 2)
    ]
    z1 = model(GraphBatch.from_featured(views[0], dtype=dtype)).pooled
    z2 = model(GraphBatch.from_featured(views[1], dtype=dtype)).pooled
    contrastive = graph_contrastive_loss(z1, z2, config["cge.temp"])

    encoding = model(GraphBatch.from_featured(graphs, dtype=dtype))
    if any(has_edge_pairs(fg) for fg in graphs):
        edge, accuracy = batch_edge_type_loss(
            encoding, graphs, config["cge.neg_ratio"], derive_seed(seed, 0xED6E), model.edge_head
        )
    else:
        # nothing to classify in this batch
        edge = encoding.node_states.sum() * 0.0
        accuracy = 0.0
    total = config["cge.lambda_cl"] * contrastive + config["cge.lambda_edge"] * edge
    return Stage1Loss(total=total, contrastive=contrastive, edge=edge, edge_accuracy=accuracy)


def train_stage1(corpus, config, seed: int, model=None) -> Stage1Result:
    if not corpus:
        raise DegenerateInput("stage 1 needs a non-empty corpus")
    torch.manual_seed(seed)
    model = model or CodeGraphEncoder.from_config(config)
    optimizer = build_optimizer(model.parameters(), config["cge.lr"], config["cge.weight_decay"])
    stopper = EarlyStopping(config["cge.patience"])
    trace = LossTrace()
    best_state = snapshot(model)
    rng = np.random.default_rng(seed)

    logger.info(f"stage 1: {len(corpus)} graphs, {sum(p.numel() for p in model.parameters())} parameters")
    for epoch in range(config["cge.epochs"]):
        model.train()
        totals = np.zeros(4)
        batches = minibatches(len(corpus), config["cge.batch_size"], rng)
        for b, indices in enumerate(batches):
            graphs = [corpus[i] for i in indices]
            loss = stage1_loss(model, graphs, config, derive_seed(seed, epoch, b))
            check_finite(loss.total, f"epoch {epoch} batch {b}")
            optimizer.zero_grad()
            loss.total.backward()
            optimizer.step()
            totals += [loss.total.item(), loss.contrastive.item(), loss.edge.item(), loss.edge_accuracy]

        means = totals / len(batches)
        trace.record(epoch, loss=means[0], contrastive=means[1], edge=means[2],
                     edge_accuracy=means[3], lr=optimizer.param_groups[0]["lr"])
        stop = stopper.update(means[0], epoch)
        if stopper.improved_last:
            best_state = snapshot(model)
        if stop:
            trace.stopped_early = True
            logger.info(f"stage 1 stopped early at epoch {epoch}")
            break

    model.load_state_dict(best_state)
    trace.best_epoch = stopper.best_epoch
    return Stage1Result(model=model, trace=trace)
