from .graph import (Graph, Plan, Subgraph, batch_plan, full_plan, graph_from_edges, graph_from_tri,
                    hop, nodewise_plan, sample_subgraph)
from .loss import kl_loss
from .model import (OccupancyModel, ShapeMismatch, forward_full, forward_nodewise, occupancy,
                    predict_scores)
from .optim import Adam, scheduled_lr
from .train import History, Scene, TrainConfig, train
