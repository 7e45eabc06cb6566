"""
Command line pipeline: synth -> extract -> featurize -> stats -> pretrain ->
align -> adapt -> generate, plus the gradient-check harness

Every relative path is resolved against --workdir; each command writes a
JSON report to <workdir>/reports/<command>.json.
"""
import argparse
import json
import sys
from pathlib import Path

from loguru import logger

from config.pipeline import PipelineConfig
from config.settings import TASK_INSTRUCTIONS, WORKDIR_LAYOUT
from utils.exceptions import CodeGraphError, ConfigError, NonFiniteLoss
from utils.logging import configure_logging

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_NON_FINITE = 0, 1, 2, 3


def write_report(config: PipelineConfig, name: str, payload: dict) -> Path:
    path = config.resolve(WORKDIR_LAYOUT["reports"]) / f"{name}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"report written to {path}")
    return path


def checkpoint_path(config: PipelineConfig, name: str) -> Path:
    return config.resolve(WORKDIR_LAYOUT["checkpoints"]) / name


def read_jsonl(path) -> list:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def write_jsonl(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def cmd_synth(args, config) -> int:
    from data.synthetic import generate_corpus

    out = config.resolve(args.out)
    out.mkdir(parents=True, exist_ok=True)
    programs = generate_corpus(args.count, config.seed, distinct_templates=args.distinct)
    summaries = []
    for program in programs:
        name = Path(program.unit.id).name
        (out / name).write_text(program.unit.code, encoding="utf-8", newline="\n")
        summaries.append({"id": name, "summary": program.summary, "template": program.template})
    write_jsonl(out / "summaries.jsonl", summaries)
    write_report(config, "synth", {"count": len(programs), "out": args.out, "seed": config.seed})
    return EXIT_OK


def cmd_extract(args, config) -> int:
    from data.store import write_graphs_jsonl
    from extract.pipeline import collect_units, extract_units, verify_graph

    units, unreadable = collect_units(config.resolve(args.input), args.lang)
    threads = args.threads if args.threads is not None else config["extract.threads"]
    result = extract_units(units, threads=threads, obfuscate_seed=args.obfuscate_seed)
    result.rejected = sorted(unreadable + result.rejected)
    write_graphs_jsonl(result.graphs, config.resolve(args.out))

    violations = {}
    if args.verify:
        for graph in result.graphs:
            problems = verify_graph(graph)
            if problems:
                violations[graph.source_id] = problems
                logger.error(f"{graph.source_id}: {'; '.join(problems)}")

    counts = result.counts
    print(json.dumps(counts, sort_keys=True))
    write_report(config, "extract", {
        **counts,
        "out": args.out,
        "rejected_units": [{"id": uid, "reason": reason} for uid, reason in result.rejected],
        "verified": bool(args.verify),
        "violations": violations,
    })
    return EXIT_FAILURE if violations else EXIT_OK


def cmd_featurize(args, config) -> int:
    from data.features import encode_features
    from data.store import persist_dataset, read_graphs_jsonl
    from extract.pipeline import select_edge_classes

    graphs = read_graphs_jsonl(config.resolve(args.graphs))
    classes = config["features.edge_classes"].split(",")
    featured = []
    for index, graph in enumerate(graphs):
        graph = select_edge_classes(graph, classes)
        node_sidecar = config.resolve(args.node_sidecars) / f"{index:05d}.cgfb" if args.node_sidecars else None
        edge_sidecar = config.resolve(args.edge_sidecars) / f"{index:05d}.cgfb" if args.edge_sidecars else None
        featured.append(encode_features(graph, config["features.dim"], node_sidecar, edge_sidecar))
    persist_dataset(featured, config.resolve(args.out))
    write_report(config, "featurize", {
        "graphs": len(featured), "dim": config["features.dim"],
        "edge_classes": classes, "out": args.out,
    })
    return EXIT_OK


def cmd_stats(args, config) -> int:
    from data.stats import graph_frame, language_counts, length_breakdown, stats_from_frame
    from data.store import read_graphs_jsonl

    path = config.resolve(args.dataset)
    graphs_file = path / WORKDIR_LAYOUT["graphs_file"] if path.is_dir() else path
    frame = graph_frame(read_graphs_jsonl(graphs_file))
    report = {
        **stats_from_frame(frame).to_dict(),
        "languages": language_counts(frame),
        "length_bins": length_breakdown(frame),
    }
    print(json.dumps(report, sort_keys=True))
    write_report(config, "stats", report)
    return EXIT_OK


def load_encoder(config, path=None):
    from cge.model import CodeGraphEncoder
    from utils.checkpoint import load_checkpoint

    encoder = CodeGraphEncoder.from_config(config)
    path = checkpoint_path(config, "cge") if path is None else config.resolve(path)
    if config["cge.pretrained"] or path.exists():
        load_checkpoint(encoder, path, kind="cge")
    else:
        logger.info("cge.pretrained is false and no encoder checkpoint exists, using a random encoder")
    return encoder


def load_bridge(config, path):
    from bridge.model import Bridge
    from utils.checkpoint import load_checkpoint

    bridge = Bridge.from_config(config)
    load_checkpoint(bridge, path, kind="bridge")
    return bridge


def cmd_pretrain(args, config) -> int:
    from cge.model import CodeGraphEncoder
    from cge.training import train_stage1
    from data.store import load_dataset
    from utils.checkpoint import save_checkpoint

    corpus = load_dataset(config.resolve(args.dataset))
    if config["cge.pretrained"]:
        result = train_stage1(corpus, config, config.seed)
        encoder, trace = result.model, result.trace.to_dict()
    else:
        logger.info("cge.pretrained is false, saving a randomly initialized encoder")
        encoder, trace = CodeGraphEncoder.from_config(config), {"epochs": [], "stopped_early": False, "best_epoch": -1}
    save_checkpoint(encoder, checkpoint_path(config, "cge"), "cge", config.to_dict())
    write_report(config, "pretrain", {
        "checkpoint": f"{WORKDIR_LAYOUT['checkpoints']}/cge",
        "graphs": len(corpus),
        "trace": trace,
        "config": config.section("cge"),
    })
    return EXIT_OK


def cmd_align(args, config) -> int:
    from bridge.training import evaluate_alignment, train_stage2
    from data.store import load_dataset
    from utils.checkpoint import save_checkpoint

    corpus = load_dataset(config.resolve(args.dataset))
    encoder = load_encoder(config, args.cge)
    result = train_stage2(corpus, config, config.seed, encoder=encoder)
    save_checkpoint(result.bridge, checkpoint_path(config, "bridge"), "bridge", config.to_dict())
    if config["bridge.finetune_cge"]:
        save_checkpoint(result.encoder, checkpoint_path(config, "cge_aligned"), "cge", config.to_dict())

    held_out = load_dataset(config.resolve(args.eval_dataset)) if args.eval_dataset else corpus
    evaluation = evaluate_alignment(result.bridge, result.encoder, held_out)
    logger.info(f"alignment: R@1={evaluation['recall_at_1']:.3f} GTM acc={evaluation['gtm_accuracy']:.3f}")
    write_report(config, "align", {
        "checkpoint": f"{WORKDIR_LAYOUT['checkpoints']}/bridge",
        "pairs": len(corpus),
        "trace": result.trace.to_dict(),
        "evaluation": evaluation,
        "objectives": {name: config[f"bridge.use_{name}"] for name in ("gtc", "gtm", "gtg")},
    })
    return EXIT_OK


def aligned_encoder(config, path):
    if path is None and config["bridge.finetune_cge"] and checkpoint_path(config, "cge_aligned").exists():
        path = f"{WORKDIR_LAYOUT['checkpoints']}/cge_aligned"
    return load_encoder(config, path)


def cmd_adapt(args, config) -> int:
    from adapter.decoder import train_decoder_fixture
    from adapter.training import TaskExample, evaluate_nll, train_stage3
    from data.store import load_dataset
    from utils.checkpoint import save_checkpoint

    corpus = load_dataset(config.resolve(args.dataset))
    answers = {}
    for record in read_jsonl(config.resolve(args.answers)):
        answers[record["id"]] = record.get("answer", record.get("summary"))
    examples = [TaskExample(fg, answers[fg.graph.source_id]) for fg in corpus if answers.get(fg.graph.source_id)]
    missing = len(corpus) - len(examples)
    if missing:
        logger.warning(f"{missing} graphs have no answer and are left out of stage 3")
    if not examples:
        raise CodeGraphError("no graph in the dataset has an answer")

    encoder = aligned_encoder(config, args.cge)
    bridge = load_bridge(config, config.resolve(args.bridge))
    decoder = train_decoder_fixture([ex.answer for ex in examples] + [fg.graph.code for fg in corpus], config, config.seed)
    save_checkpoint(decoder, checkpoint_path(config, "decoder"), "decoder", config.to_dict(),
                    extra={"checksum": decoder.checksum()})

    instruction = TASK_INSTRUCTIONS[config["stage3.task"]]
    nll_before = evaluate_nll(bridge, encoder, decoder, examples, instruction)
    result = train_stage3(examples, config, config.seed, bridge, encoder, decoder)
    nll_after = evaluate_nll(result.bridge, encoder, decoder, examples, instruction)
    save_checkpoint(result.bridge, checkpoint_path(config, "bridge_adapted"), "bridge", config.to_dict())
    write_report(config, "adapt", {
        "checkpoint": f"{WORKDIR_LAYOUT['checkpoints']}/bridge_adapted",
        "decoder_checksum": result.decoder_checksum,
        "examples": len(examples),
        "nll_before": nll_before,
        "nll_after": nll_after,
        "task": config["stage3.task"],
        "trace": result.trace.to_dict(),
    })
    return EXIT_OK


def cmd_generate(args, config) -> int:
    import torch

    from adapter.decoder import FrozenDecoder
    from adapter.generation import generate
    from adapter.training import soft_prompts
    from data.store import load_dataset
    from utils.checkpoint import load_checkpoint

    corpus = load_dataset(config.resolve(args.dataset))
    if args.bridge:
        bridge_path = config.resolve(args.bridge)
    else:
        adapted = checkpoint_path(config, "bridge_adapted")
        bridge_path = adapted if adapted.exists() else checkpoint_path(config, "bridge")
    bridge = load_bridge(config, bridge_path)
    encoder = aligned_encoder(config, args.cge)
    decoder = FrozenDecoder.from_config(config)
    decoder_path = config.resolve(args.decoder) if args.decoder else checkpoint_path(config, "decoder")
    load_checkpoint(decoder, decoder_path, kind="decoder")
    decoder.freeze()
    bridge.eval()

    instruction = TASK_INSTRUCTIONS[config["stage3.task"]]
    records = []
    with torch.no_grad():
        for fg in corpus:
            prompt = soft_prompts(bridge, encoder, [fg])[0]
            output = generate(prompt, instruction, fg.graph.code, decoder,
                              config["stage3.max_new_tokens"], config["stage3.rep_penalty"])
            records.append({"id": fg.graph.source_id, "instruction": instruction, "output": output})
    write_jsonl(config.resolve(args.out), records)
    write_report(config, "generate", {"count": len(records), "out": args.out, "task": config["stage3.task"]})
    return EXIT_OK


def cmd_gradcheck(args, config) -> int:
    from utils.gradcheck import COMPONENTS, run_gradcheck

    components = COMPONENTS if args.component == "all" else (args.component,)
    passed = True
    for component in components:
        report = run_gradcheck(component, config.seed, inject_fault=args.inject_fault)
        write_report(config, f"gradcheck_{component}", report.to_dict())
        status = "pass" if report.passed else f"FAIL ({', '.join(report.failed_groups) or 'invariants'})"
        logger.info(f"gradcheck {component}: {status}")
        passed = passed and report.passed
    return EXIT_OK if passed else EXIT_FAILURE


COMMANDS = {
    "synth": cmd_synth, "extract": cmd_extract, "featurize": cmd_featurize, "stats": cmd_stats,
    "pretrain": cmd_pretrain, "align": cmd_align, "adapt": cmd_adapt, "generate": cmd_generate,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgbridge", description="Code property graphs and graph-to-LM bridging")
    parser.add_argument("--workdir", default=".", help="base directory for every relative path")
    parser.add_argument("--config", help="JSON config file (relative to --workdir)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; repeatable")
    parser.add_argument("--seed", type=int, help="global seed (falls back to CGB_SEED)")
    parser.add_argument("--threads", type=int, help="worker / torch thread count")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write a seeded synthetic Python corpus with summaries")
    synth.add_argument("--count", type=int, default=200)
    synth.add_argument("--out", default="corpus")
    synth.add_argument("--distinct", action="store_true", help="cycle templates instead of sampling them")

    extract = sub.add_parser("extract", help="source files -> graphs.jsonl")
    extract.add_argument("--lang", choices=("python", "java"), default="python")
    extract.add_argument("--input", required=True)
    extract.add_argument("--out", default=WORKDIR_LAYOUT["graphs_file"])
    extract.add_argument("--obfuscate-seed", type=int, default=None)
    extract.add_argument("--verify", action="store_true", help="check tree and span invariants; exit 1 on violation")

    featurize = sub.add_parser("featurize", help="graphs.jsonl -> dataset directory with CGFB features")
    featurize.add_argument("--graphs", default=WORKDIR_LAYOUT["graphs_file"])
    featurize.add_argument("--out", default="dataset")
    featurize.add_argument("--node-sidecars", help="directory of <index>.cgfb node feature files")
    featurize.add_argument("--edge-sidecars", help="directory of <index>.cgfb edge feature files")

    stats = sub.add_parser("stats", help="dataset statistics report")
    stats.add_argument("--dataset", default="dataset")

    pretrain = sub.add_parser("pretrain", help="stage 1: graph encoder pretraining")
    pretrain.add_argument("--dataset", default="dataset")

    align = sub.add_parser("align", help="stage 2: graph-text alignment of the bridge")
    align.add_argument("--dataset", default="dataset")
    align.add_argument("--eval-dataset", default=None)
    align.add_argument("--cge", default=None, help="encoder checkpoint (default checkpoints/cge)")

    adapt = sub.add_parser("adapt", help="stage 3: soft-prompt adaptation against the frozen decoder")
    adapt.add_argument("--dataset", default="dataset")
    adapt.add_argument("--answers", default="corpus/summaries.jsonl", help="JSONL of {id, answer|summary}")
    adapt.add_argument("--bridge", default=f"{WORKDIR_LAYOUT['checkpoints']}/bridge")
    adapt.add_argument("--cge", default=None)

    generate = sub.add_parser("generate", help="greedy generation for every graph of a dataset")
    generate.add_argument("--dataset", default="dataset")
    generate.add_argument("--bridge", default=None)
    generate.add_argument("--cge", default=None)
    generate.add_argument("--decoder", default=None)
    generate.add_argument("--out", default="generations.jsonl")

    gradcheck = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    gradcheck.add_argument("--component", choices=("stage1", "gtc", "gtm", "gtg", "stage3", "all"), default="all")
    gradcheck.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    return parser


def load_config(args) -> PipelineConfig:
    overrides = dict(PipelineConfig.parse_override(text) for text in args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    return PipelineConfig.load(args.config, overrides, workdir=args.workdir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = load_config(args)
        if args.command not in ("synth", "extract", "featurize", "stats"):
            from utils.seeding import set_seed
            set_seed(config.seed, config["threads"])
        return COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except NonFiniteLoss as e:
        logger.error(str(e))
        return EXIT_NON_FINITE
    except (CodeGraphError, OSError, KeyError, json.JSONDecodeError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
