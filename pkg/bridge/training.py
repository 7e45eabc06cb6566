"""
Stage 2: align graph and code text through the bridge with graph-text
contrastive (GTC), matching (GTM) and generation (GTG) objectives
"""
from dataclasses import dataclass

import numpy as np
import torch
from loguru import logger

from bridge.losses import gtc_loss, gtg_loss, gtm_loss, mine_hard_negatives, query_text_similarity
from bridge.model import Bridge, load_initial_weights
from bridge.tokenizer import PAD, generation_tokens, pad_batch, tokenize_code
from cge.model import CodeGraphEncoder, GraphBatch
from utils.exceptions import DegenerateInput
from utils.seeding import derive_seed
from utils.training import (
    EarlyStopping, LossTrace, WarmupPlateauSchedule, build_optimizer, check_finite,
    minibatches, snapshot, warmup_steps_for,
)


@dataclass
class AlignmentBatch:
    memory: torch.Tensor
    memory_mask: torch.Tensor
    ids: torch.Tensor
    token_mask: torch.Tensor
    generation_input: torch.Tensor
    generation_target: torch.Tensor
    generation_mask: torch.Tensor

    @property
    def size(self) -> int:
        return self.ids.shape[0]


@dataclass
class Stage2Loss:
    total: torch.Tensor
    gtc: torch.Tensor
    gtm: torch.Tensor
    gtg: torch.Tensor
    gtm_accuracy: float


@dataclass
class Stage2Result:
    bridge: Bridge
    encoder: CodeGraphEncoder
    trace: LossTrace


def encode_for_bridge(encoder: CodeGraphEncoder, graphs, finetune: bool = False):
    dtype = next(encoder.parameters()).dtype
    batch = GraphBatch.from_featured(graphs, dtype=dtype)
    if finetune:
        encoder.train()
        return encoder(batch)
    encoder.eval()
    with torch.no_grad():
        return encoder(batch)


def prepare_batch(graphs, encoder, bridge: Bridge, finetune: bool = False) -> AlignmentBatch:
    encoding = encode_for_bridge(encoder, graphs, finetune)
    memory, memory_mask = bridge.graph_memory(encoding, len(graphs))

    ids, mask = pad_batch([tokenize_code(fg.graph.code, bridge.max_len) for fg in graphs])
    pairs = [generation_tokens(fg.graph.code, bridge.max_len) for fg in graphs]
    gen_in, gen_mask = pad_batch([source for source, _ in pairs])
    gen_out, _ = pad_batch([target for _, target in pairs], pad=PAD)
    return AlignmentBatch(
        memory=memory, memory_mask=memory_mask,
        ids=torch.tensor(ids, dtype=torch.long), token_mask=torch.tensor(mask),
        generation_input=torch.tensor(gen_in, dtype=torch.long),
        generation_target=torch.tensor(gen_out, dtype=torch.long),
        generation_mask=torch.tensor(gen_mask),
    )


def matching_pairs(size: int, similarity, k: int, seed: int):
    """Graph/text index lists and labels: positives, then one mined negative per graph and per text"""
    graphs, texts = list(range(size)), list(range(size))
    labels = [1.0] * size
    if size >= 2:
        neg_text, neg_graph = mine_hard_negatives(similarity, k, seed)
        graphs += list(range(size)) + neg_graph
        texts += neg_text + list(range(size))
        labels += [0.0] * (2 * size)
    return graphs, texts, labels


def stage2_loss(bridge: Bridge, batch: AlignmentBatch, config, seed: int) -> Stage2Loss:
    queries = bridge.query_forward(batch.memory, batch.memory_mask)
    h_cls = bridge.text_forward(batch.ids, batch.token_mask)
    gtc = gtc_loss(queries, h_cls, bridge.tau)

    similarity = query_text_similarity(queries, h_cls).detach()
    g, t, labels = matching_pairs(batch.size, similarity, config["bridge.hard_negative_k"], seed)
    logits = bridge.match_logits(
        batch.memory[g], batch.memory_mask[g], batch.ids[t], batch.token_mask[t], h_cls[t]
    )
    labels = torch.tensor(labels, dtype=logits.dtype)
    gtm = gtm_loss(logits, labels)
    accuracy = float(((logits > 0).to(labels.dtype) == labels).to(torch.float64).mean())

    gen_logits = bridge.generation_logits(
        batch.memory, batch.memory_mask, batch.generation_input, batch.generation_mask
    )
    gtg = gtg_loss(gen_logits, batch.generation_target, batch.generation_mask)

    weights = [float(config[f"bridge.use_{name}"]) for name in ("gtc", "gtm", "gtg")]
    total = weights[0] * gtc + weights[1] * gtm + weights[2] * gtg
    return Stage2Loss(total=total, gtc=gtc, gtm=gtm, gtg=gtg, gtm_accuracy=accuracy)


def build_bridge(config) -> Bridge:
    bridge = Bridge.from_config(config)
    if config["bridge.init_weights"]:
        load_initial_weights(bridge, config.resolve(config["bridge.init_weights"]))
    return bridge


def train_stage2(corpus, config, seed: int, encoder=None, bridge=None) -> Stage2Result:
    if not corpus:
        raise DegenerateInput("stage 2 needs a non-empty corpus")
    torch.manual_seed(seed)
    encoder = encoder or CodeGraphEncoder.from_config(config)
    bridge = bridge or build_bridge(config)
    finetune = config["bridge.finetune_cge"]
    for param in encoder.parameters():
        param.requires_grad_(finetune)

    params = list(bridge.parameters()) + (list(encoder.parameters()) if finetune else [])
    optimizer = build_optimizer(params, config["bridge.lr"], config["bridge.weight_decay"])
    batches_per_epoch = -(-len(corpus) // config["bridge.batch_size"])
    schedule = WarmupPlateauSchedule(
        optimizer, config["bridge.lr"],
        warmup_steps_for(config["bridge.warmup_ratio"], config["bridge.epochs"], batches_per_epoch),
        patience=config["bridge.scheduler_patience"], factor=config["bridge.scheduler_factor"],
        min_lr=config["bridge.min_lr"],
    )
    stopper = EarlyStopping(config["bridge.patience"])
    trace = LossTrace()
    best = (snapshot(bridge), snapshot(encoder))
    rng = np.random.default_rng(seed)

    logger.info(f"stage 2: {len(corpus)} pairs, encoder {'finetuned' if finetune else 'frozen'}")
    for epoch in range(config["bridge.epochs"]):
        bridge.train()
        totals = np.zeros(5)
        batches = minibatches(len(corpus), config["bridge.batch_size"], rng)
        for b, indices in enumerate(batches):
            batch = prepare_batch([corpus[i] for i in indices], encoder, bridge, finetune)
            loss = stage2_loss(bridge, batch, config, derive_seed(seed, epoch, b))
            check_finite(loss.total, f"epoch {epoch} batch {b}")
            optimizer.zero_grad()
            loss.total.backward()
            optimizer.step()
            schedule.step_batch()
            totals += [loss.total.item(), loss.gtc.item(), loss.gtm.item(), loss.gtg.item(), loss.gtm_accuracy]

        means = totals / len(batches)
        trace.record(epoch, loss=means[0], gtc=means[1], gtm=means[2], gtg=means[3],
                     gtm_accuracy=means[4], lr=schedule.lr)
        schedule.step_epoch(means[0])
        stop = stopper.update(means[0], epoch)
        if stopper.improved_last:
            best = (snapshot(bridge), snapshot(encoder))
        if stop:
            trace.stopped_early = True
            logger.info(f"stage 2 stopped early at epoch {epoch}")
            break

    bridge.load_state_dict(best[0])
    encoder.load_state_dict(best[1])
    trace.best_epoch = stopper.best_epoch
    return Stage2Result(bridge=bridge, encoder=encoder, trace=trace)


def evaluate_alignment(bridge: Bridge, encoder: CodeGraphEncoder, graphs, batch_size: int = 64) -> dict:
    """
    Graph->text retrieval R@1 over max-cosine similarity, and matching accuracy
    on every positive pair plus the hardest negative text of each graph
    """
    bridge.eval()
    queries, texts, batches = [], [], []
    with torch.no_grad():
        for start in range(0, len(graphs), batch_size):
            batch = prepare_batch(graphs[start:start + batch_size], encoder, bridge)
            queries.append(bridge.query_forward(batch.memory, batch.memory_mask))
            texts.append(bridge.text_forward(batch.ids, batch.token_mask))
            batches.append(batch)
        queries, h_cls = torch.cat(queries), torch.cat(texts)
        similarity = query_text_similarity(queries, h_cls)
        m = similarity.shape[0]
        recall = float((similarity.argmax(dim=1) == torch.arange(m)).to(torch.float64).mean())

        if m < 2:
            return {"pairs": m, "recall_at_1": recall, "gtm_accuracy": float("nan")}
        masked = similarity.clone()
        masked.fill_diagonal_(-float("inf"))
        hardest = masked.argmax(dim=1)

        memory_rows, memory_masks, width = [], [], max(b.memory.shape[1] for b in batches)
        for b in batches:
            pad = width - b.memory.shape[1]
            memory_rows.append(torch.nn.functional.pad(b.memory, (0, 0, 0, pad)))
            memory_masks.append(torch.nn.functional.pad(b.memory_mask, (0, pad), value=False))
        memory, memory_mask = torch.cat(memory_rows), torch.cat(memory_masks)
        ids, token_mask = pad_batch([tokenize_code(fg.graph.code, bridge.max_len) for fg in graphs])
        ids, token_mask = torch.tensor(ids, dtype=torch.long), torch.tensor(token_mask)

        correct = 0
        for text_index, label in ((torch.arange(m), 1.0), (hardest, 0.0)):
            logits = bridge.match_logits(memory, memory_mask, ids[text_index], token_mask[text_index], h_cls[text_index])
            correct += int(((logits > 0).to(torch.float64) == label).sum())
    return {"pairs": m, "recall_at_1": recall, "gtm_accuracy": correct / (2 * m)}
