from cge.augment import augment_view
from cge.losses import edge_type_loss, graph_contrastive_loss
from cge.model import CodeGraphEncoder, GraphBatch, GraphEncoding, GraphTransformerLayer, encode_graph
from cge.training import train_stage1

__all__ = [
    "GraphTransformerLayer", "CodeGraphEncoder", "GraphBatch", "GraphEncoding",
    "encode_graph", "augment_view", "graph_contrastive_loss", "edge_type_loss",
    "train_stage1",
]
