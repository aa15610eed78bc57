from .reader import Interaction, InteractionTable, Ml1mReader, TsvReader
from .reader import load_interactions, subsample_interactions
from .graph import BipartiteGraph, build_graph, USER, ITEM
from .neighborhood import Subgraph, MaskedNeighborhood, mask_neighborhood, grow_tree, first_order_sample
from .splits import MetaSplit, ExtrinsicSplit, ExperimentSplits
from .splits import meta_split, intrinsic_split, extrinsic_split, build_working_graph, build_splits
from .toy import make_block_dataset
