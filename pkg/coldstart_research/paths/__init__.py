from .walks import Path, MaskedPath, PositionedPaths, MASK_TOKEN
from .walks import generate_paths, generate_positioned_paths, positioned_path, mask_path, neighbor_fn, dump_paths
from .augment import GraphAugmentor, augment_subgraph, augment_path
