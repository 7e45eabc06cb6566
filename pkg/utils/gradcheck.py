"""
Finite-difference gradient checks for every training objective

Each component builds a tiny float64 instance (width 8, at most 6 nodes
per graph, 3 graphs), compares autograd against central differences on a
sample of coordinates per parameter and reports the worst relative error
per parameter group.
"""
from dataclasses import dataclass, field

import numpy as np
import torch

from config.pipeline import PipelineConfig
from config.taxonomy import CFG_ATTRS, DFG_ATTRS
from data.features import FeaturedGraph
from extract.types import CodePropertyGraph, CpgEdge, CpgNode

STEP = 1e-5
TOLERANCE = 1e-4
ERROR_FLOOR = 1e-3

TOY_CONFIG = {
    "features.dim": 8,
    "cge.in_dim": 8, "cge.hidden": 8, "cge.out_dim": 8, "cge.layers": 2, "cge.heads": 2,
    "cge.dropout": 0.0, "cge.node_drop": 0.2, "cge.edge_drop": 0.2, "cge.edge_head_hidden": 8,
    "bridge.d_model": 8, "bridge.heads": 2, "bridge.ffn": 16, "bridge.layers": 2,
    "bridge.queries": 4, "bridge.cross_freq": 2, "bridge.max_len": 32, "bridge.dropout": 0.0,
    "decoder.d_llm": 8, "decoder.heads": 2, "decoder.layers": 1, "decoder.context": 128,
}

COMPONENTS = ("stage1", "gtc", "gtm", "gtg", "stage3")


@dataclass
class GroupResult:
    max_rel_error: float
    checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= TOLERANCE

    def to_dict(self) -> dict:
        return {"max_rel_error": self.max_rel_error, "checked": self.checked, "passed": self.passed}


@dataclass
class GradcheckReport:
    component: str
    seed: int
    groups: dict = field(default_factory=dict)
    invariants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.groups.values()) and all(p["passed"] for p in self.invariants.values())

    @property
    def failed_groups(self) -> list:
        return sorted(name for name, g in self.groups.items() if not g.passed)

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "seed": self.seed,
            "step": STEP,
            "tolerance": TOLERANCE,
            "passed": self.passed,
            "groups": {name: self.groups[name].to_dict() for name in sorted(self.groups)},
            "invariants": self.invariants,
        }


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), ERROR_FLOOR)


def group_of(name: str) -> str:
    """Parameter group: owner prefix plus the top module, with the layer index for stacks"""
    parts = name.split(".")
    keep = 1
    while keep < len(parts) and parts[keep - 1] in ("encoder", "bridge"):
        keep += 1
    if keep < len(parts) and parts[keep - 1] in ("layers", "blocks", "norms"):
        keep += 1
    return ".".join(parts[:keep])


def check_gradients(loss_fn, params: dict, seed: int, samples: int = 3, top: int = 2, inject_fault=None) -> dict:
    """
    Compare autograd with central differences on `top` largest-gradient plus
    `samples` random coordinates of every parameter; returns {group: GroupResult}.
    `inject_fault` names a group whose analytic gradient is sign-flipped.
    """
    names = list(params)
    loss = loss_fn()
    grads = torch.autograd.grad(loss, [params[n] for n in names], allow_unused=True)
    rng = np.random.default_rng(seed)
    results = {}

    for name, grad in zip(names, grads):
        param = params[name]
        analytic = torch.zeros_like(param) if grad is None else grad.detach()
        group = group_of(name)
        if group == inject_fault:
            analytic = -analytic
        flat = analytic.reshape(-1)
        by_size = torch.argsort(flat.abs(), descending=True, stable=True)[:top].tolist()
        extra = rng.choice(flat.numel(), size=min(samples, flat.numel()), replace=False).tolist()
        coordinates = list(dict.fromkeys(by_size + extra))

        worst = 0.0
        data = param.data.view(-1)
        with torch.no_grad():
            for index in coordinates:
                original = data[index].item()
                data[index] = original + STEP
                plus = float(loss_fn())
                data[index] = original - STEP
                minus = float(loss_fn())
                data[index] = original
                numeric = (plus - minus) / (2 * STEP)
                worst = max(worst, relative_error(float(flat[index]), numeric))

        previous = results.get(group)
        if previous is None:
            results[group] = GroupResult(worst, len(coordinates))
        else:
            results[group] = GroupResult(max(previous.max_rel_error, worst), previous.checked + len(coordinates))
    return results


def toy_config(**overrides) -> PipelineConfig:
    return PipelineConfig({**TOY_CONFIG, **overrides})


def toy_graphs(rng: np.random.Generator, count: int = 3, dim: int = 8) -> list:
    """Random small graphs: an AST tree plus a few CFG/DFG edges, random features"""
    graphs = []
    for g in range(count):
        n = int(rng.integers(3, 7))
        nodes = tuple(CpgNode(i, "module" if i == 0 else "identifier", f"n{i}", (0, 0)) for i in range(n))
        edges = [CpgEdge(int(rng.integers(i)), i, "AST", "contains") for i in range(1, n)]
        for _ in range(2):
            u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
            edges.append(CpgEdge(u, v, "CFG", CFG_ATTRS[int(rng.integers(len(CFG_ATTRS)))]))
        u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
        edges.append(CpgEdge(u, v, "DFG", DFG_ATTRS[int(rng.integers(len(DFG_ATTRS)))]))
        graph = CodePropertyGraph(f"toy/{g}", nodes, tuple(edges), code=f"v{g} = {g} + w")
        graphs.append(FeaturedGraph(
            graph=graph,
            node_features=rng.standard_normal((n, dim)).astype(np.float32),
            edge_features=rng.standard_normal((len(edges), dim)).astype(np.float32),
        ))
    return graphs


def _params(prefix: str, module) -> dict:
    return {f"{prefix}{name}": p for name, p in module.named_parameters() if p.requires_grad}


def _stage1(seed: int):
    from cge.model import CodeGraphEncoder
    from cge.training import stage1_loss

    config = toy_config()
    graphs = toy_graphs(np.random.default_rng(seed))
    model = CodeGraphEncoder.from_config(config).double().train()
    return (lambda: stage1_loss(model, graphs, config, seed).total), _params("", model), {}


def _bridge_setup(seed: int, **overrides):
    from bridge.model import Bridge
    from bridge.training import prepare_batch
    from cge.model import CodeGraphEncoder

    config = toy_config(**overrides)
    graphs = toy_graphs(np.random.default_rng(seed))
    encoder = CodeGraphEncoder.from_config(config).double().eval()
    for p in encoder.parameters():
        p.requires_grad_(False)
    bridge = Bridge.from_config(config).double().train()
    return config, graphs, encoder, bridge, (lambda: prepare_batch(graphs, encoder, bridge))


def _gtc(seed: int):
    from bridge.losses import gtc_loss

    _, _, _, bridge, batch_of = _bridge_setup(seed)

    def loss_fn():
        batch = batch_of()
        return gtc_loss(
            bridge.query_forward(batch.memory, batch.memory_mask),
            bridge.text_forward(batch.ids, batch.token_mask),
            bridge.tau,
        )

    return loss_fn, _params("", bridge), {}


def _gtm(seed: int):
    from bridge.losses import gtm_loss, query_text_similarity
    from bridge.training import matching_pairs

    _, _, _, bridge, batch_of = _bridge_setup(seed)
    with torch.no_grad():
        batch = batch_of()
        similarity = query_text_similarity(
            bridge.query_forward(batch.memory, batch.memory_mask),
            bridge.text_forward(batch.ids, batch.token_mask),
        )
    g, t, labels = matching_pairs(batch.size, similarity, 3, seed)
    labels = torch.tensor(labels, dtype=torch.float64)

    def loss_fn():
        batch = batch_of()
        h_cls = bridge.text_forward(batch.ids, batch.token_mask)
        logits = bridge.match_logits(batch.memory[g], batch.memory_mask[g], batch.ids[t], batch.token_mask[t], h_cls[t])
        return gtm_loss(logits, labels)

    return loss_fn, _params("", bridge), {}


def causal_invariant(bridge, batch) -> dict:
    """Changing the last input token must leave every earlier position's logits untouched"""
    bridge.eval()
    with torch.no_grad():
        ids = batch.generation_input
        cut = ids.shape[1] - 1
        before = bridge.generation_logits(batch.memory, batch.memory_mask, ids, batch.generation_mask)
        changed = ids.clone()
        changed[:, cut] = (changed[:, cut] - 4 + 17) % 256 + 4
        after = bridge.generation_logits(batch.memory, batch.memory_mask, changed, batch.generation_mask)
    bridge.train()
    diff = float((before[:, :cut] - after[:, :cut]).abs().max()) if cut else 0.0
    return {"max_abs_diff": diff, "passed": diff <= 1e-12}


def _gtg(seed: int):
    from bridge.losses import gtg_loss

    _, _, _, bridge, batch_of = _bridge_setup(seed)

    def loss_fn():
        batch = batch_of()
        logits = bridge.generation_logits(batch.memory, batch.memory_mask, batch.generation_input, batch.generation_mask)
        return gtg_loss(logits, batch.generation_target, batch.generation_mask)

    with torch.no_grad():
        causal = causal_invariant(bridge, batch_of())
    return loss_fn, _params("", bridge), {"causal": causal}


def _stage3(seed: int):
    from adapter.decoder import FrozenDecoder
    from adapter.prompt import compose_input, stage3_batch_loss
    from bridge.model import project_soft_prompt
    from cge.model import GraphBatch

    config, graphs, encoder, bridge, _ = _bridge_setup(seed)
    for p in encoder.parameters():
        p.requires_grad_(True)
    decoder = FrozenDecoder.from_config(config).double()
    decoder.freeze()
    answers = ["sum", "max of two", "ok"]

    def composed_inputs():
        encoding = encoder(GraphBatch.from_featured(graphs, dtype=torch.float64))
        memory, mask = bridge.graph_memory(encoding, len(graphs))
        prompts = project_soft_prompt(bridge.query_forward(memory, mask), bridge)
        return [
            compose_input(prompts[i], "Summarize.", fg.graph.code, decoder, answer=answers[i])
            for i, fg in enumerate(graphs)
        ]

    def loss_fn():
        return stage3_batch_loss(composed_inputs(), decoder)

    with torch.no_grad():
        composed = composed_inputs()
        reference = float(stage3_batch_loss(composed, decoder))
        for c in composed:
            context = ~c.answer_mask & (c.token_ids >= 0)
            c.token_ids[context] = (c.token_ids[context] - 4 + 31) % 256 + 4
        perturbed = float(stage3_batch_loss(composed, decoder))
    invariants = {
        "answer_mask": {"max_abs_diff": abs(reference - perturbed), "passed": reference == perturbed},
        "frozen_decoder": {"passed": not any(p.requires_grad for p in decoder.parameters())},
    }
    params = {**_params("bridge.", bridge), **_params("encoder.", encoder)}
    return loss_fn, params, invariants


BUILDERS = {"stage1": _stage1, "gtc": _gtc, "gtm": _gtm, "gtg": _gtg, "stage3": _stage3}


def run_gradcheck(component: str, seed: int = 0, inject_fault=None) -> GradcheckReport:
    if component not in BUILDERS:
        raise ValueError(f"unknown gradcheck component '{component}', expected one of {list(COMPONENTS)}")
    torch.manual_seed(seed)
    loss_fn, params, invariants = BUILDERS[component](seed)
    groups = check_gradients(loss_fn, params, seed, inject_fault=inject_fault)
    return GradcheckReport(component=component, seed=seed, groups=groups, invariants=invariants)
