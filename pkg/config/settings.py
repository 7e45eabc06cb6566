"""
Application settings and constants for the code-graph bridge toolkit
Centralizes pipeline defaults, validation ranges and dashboard constants
"""

# Dashboard application configuration
APP_CONFIG = {
    "page_title": "Code Graph Bridge - Artifact Explorer",
    "page_icon": "🕸️",
    "layout": "wide",
    "initial_sidebar_state": "expanded"
}

# Edge classes are colored the same way everywhere (charts, inspector tables)
COLORS = {
    "primary": "#0066CC",
    "edge_class": {
        "AST": "#0066CC",
        "CFG": "#28A745",
        "DFG": "#DC3545",
    },
    "objective": {
        "loss": "#343A40",
        "contrastive": "#0066CC",
        "edge": "#FD7E14",
        "gtc": "#0066CC",
        "gtm": "#28A745",
        "gtg": "#DC3545",
        "nll": "#6F42C1",
    },
    "pass": "#28A745",
    "fail": "#DC3545",
}


PAGES_CONFIG = {
    "home": {
        "title": "🏠 Dataset Overview",
        "description": "Corpus statistics per edge class and node type",
        "icon": "🏠"
    },
    "training": {
        "title": "📉 Training Reports",
        "description": "Loss traces per stage and gradient-check results",
        "icon": "📉"
    },
    "inspector": {
        "title": "🔎 Graph Inspector",
        "description": "GraphText serialization and edges of one graph",
        "icon": "🔎"
    }
}

# Caching configuration
CACHE_CONFIG = {
    "dataset_ttl": 3600,
    "report_ttl": 60,
}

# Artifact layout inside a --workdir
WORKDIR_LAYOUT = {
    "reports": "reports",
    "checkpoints": "checkpoints",
    "graphs_file": "graphs.jsonl",
    "node_features": "node_features.cgfb",
    "edge_features": "edge_features.cgfb",
}

# Task prompts placed between the soft prompt and the code
TASK_INSTRUCTIONS = {
    "summarization": "Generate a Python docstring for the code below.",
    "translation": "Translate the following Python code to Java.",
}

# Pipeline defaults mirror the three stage hyperparameter tables; desk-scale
# runs shrink dims through a config file
PIPELINE_DEFAULTS = {
    "seed": 0,
    # torch threads for training; extraction fans out across files on its own pool
    "threads": 1,
    "extract.threads": 4,

    "features.dim": 768,
    "features.edge_classes": "AST,CFG,DFG",

    "cge.in_dim": 768,
    "cge.hidden": 1024,
    "cge.out_dim": 768,
    "cge.layers": 2,
    "cge.heads": 4,
    "cge.dropout": 0.1,
    "cge.node_drop": 0.05,
    "cge.edge_drop": 0.05,
    "cge.batch_size": 128,
    "cge.lr": 1e-5,
    "cge.weight_decay": 0.01,
    "cge.temp": 0.3,
    "cge.lambda_cl": 0.6,
    "cge.lambda_edge": 0.4,
    "cge.neg_ratio": 0.5,
    "cge.patience": 20,
    "cge.epochs": 200,
    "cge.edge_head_hidden": 256,
    "cge.norm": "batch",
    "cge.pretrained": True,

    "bridge.queries": 32,
    "bridge.layers": 12,
    "bridge.d_model": 768,
    "bridge.heads": 12,
    "bridge.ffn": 3072,
    "bridge.cross_freq": 2,
    "bridge.temp_init": 0.07,
    "bridge.max_len": 512,
    "bridge.dropout": 0.1,
    "bridge.batch_size": 16,
    "bridge.lr": 5e-7,
    "bridge.weight_decay": 0.01,
    "bridge.warmup_ratio": 0.01,
    "bridge.epochs": 200,
    "bridge.patience": 20,
    "bridge.scheduler_patience": 2,
    "bridge.scheduler_factor": 0.5,
    "bridge.min_lr": 1e-10,
    "bridge.hard_negative_k": 3,
    "bridge.use_gtc": True,
    "bridge.use_gtm": True,
    "bridge.use_gtg": True,
    "bridge.finetune_cge": False,
    "bridge.init_weights": "",

    "stage3.batch_size": 8,
    "stage3.lr": 1e-6,
    "stage3.weight_decay": 0.01,
    "stage3.epochs": 200,
    "stage3.warmup_ratio": 0.01,
    "stage3.patience": 20,
    "stage3.scheduler_patience": 2,
    "stage3.scheduler_factor": 0.5,
    "stage3.min_lr": 1e-10,
    "stage3.temperature": 0.0,
    "stage3.rep_penalty": 1.1,
    "stage3.max_new_tokens": 128,
    "stage3.task": "summarization",

    "decoder.d_llm": 64,
    "decoder.layers": 2,
    "decoder.heads": 4,
    "decoder.context": 1024,
    "decoder.epochs": 20,
    "decoder.lr": 1e-3,
}

# (type, lower, upper) bounds are inclusive; a tuple of strings means choices
PIPELINE_SCHEMA = {
    "seed": (int, 0, 2**32 - 1),
    "threads": (int, 1, 256),
    "extract.threads": (int, 1, 256),

    "features.dim": (int, 1, 65536),
    "features.edge_classes": "edge_classes",

    "cge.in_dim": (int, 1, 65536),
    "cge.hidden": (int, 1, 65536),
    "cge.out_dim": (int, 1, 65536),
    "cge.layers": (int, 1, 64),
    "cge.heads": (int, 1, 256),
    "cge.dropout": (float, 0.0, 0.999),
    "cge.node_drop": (float, 0.0, 0.999),
    "cge.edge_drop": (float, 0.0, 0.999),
    "cge.batch_size": (int, 1, 1_000_000),
    "cge.lr": (float, 0.0, 10.0),
    "cge.weight_decay": (float, 0.0, 10.0),
    "cge.temp": (float, 1e-6, 100.0),
    "cge.lambda_cl": (float, 0.0, 100.0),
    "cge.lambda_edge": (float, 0.0, 100.0),
    "cge.neg_ratio": (float, 0.0, 100.0),
    "cge.patience": (int, 1, 100_000),
    "cge.epochs": (int, 0, 1_000_000),
    "cge.edge_head_hidden": (int, 1, 65536),
    "cge.norm": ("batch", "layer"),
    "cge.pretrained": (bool, None, None),

    "bridge.queries": (int, 1, 4096),
    "bridge.layers": (int, 1, 128),
    "bridge.d_model": (int, 1, 65536),
    "bridge.heads": (int, 1, 256),
    "bridge.ffn": (int, 1, 262144),
    "bridge.cross_freq": (int, 1, 128),
    "bridge.temp_init": (float, 1e-6, 100.0),
    "bridge.max_len": (int, 2, 1_000_000),
    "bridge.dropout": (float, 0.0, 0.999),
    "bridge.batch_size": (int, 1, 1_000_000),
    "bridge.lr": (float, 0.0, 10.0),
    "bridge.weight_decay": (float, 0.0, 10.0),
    "bridge.warmup_ratio": (float, 0.0, 1.0),
    "bridge.epochs": (int, 0, 1_000_000),
    "bridge.patience": (int, 1, 100_000),
    "bridge.scheduler_patience": (int, 0, 100_000),
    "bridge.scheduler_factor": (float, 1e-6, 1.0),
    "bridge.min_lr": (float, 0.0, 10.0),
    "bridge.hard_negative_k": (int, 1, 1_000_000),
    "bridge.use_gtc": (bool, None, None),
    "bridge.use_gtm": (bool, None, None),
    "bridge.use_gtg": (bool, None, None),
    "bridge.finetune_cge": (bool, None, None),
    "bridge.init_weights": (str, None, None),

    "stage3.batch_size": (int, 1, 1_000_000),
    "stage3.lr": (float, 0.0, 10.0),
    "stage3.weight_decay": (float, 0.0, 10.0),
    "stage3.epochs": (int, 0, 1_000_000),
    "stage3.warmup_ratio": (float, 0.0, 1.0),
    "stage3.patience": (int, 1, 100_000),
    "stage3.scheduler_patience": (int, 0, 100_000),
    "stage3.scheduler_factor": (float, 1e-6, 1.0),
    "stage3.min_lr": (float, 0.0, 10.0),
    # only greedy decoding is supported
    "stage3.temperature": (float, 0.0, 0.0),
    "stage3.rep_penalty": (float, 1.0, 100.0),
    "stage3.max_new_tokens": (int, 0, 1_000_000),
    "stage3.task": ("summarization", "translation"),

    "decoder.d_llm": (int, 1, 65536),
    "decoder.layers": (int, 1, 64),
    "decoder.heads": (int, 1, 256),
    "decoder.context": (int, 2, 1_000_000),
    "decoder.epochs": (int, 0, 1_000_000),
    "decoder.lr": (float, 0.0, 10.0),
}
