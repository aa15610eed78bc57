import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .._scheme import AugmentationError, ConfigError, EncoderError
from .._seeding import derive_seed, make_rng
from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..models.gnn import GnnEncoder
from ..models.meta_aggregator import MetaAggregator, compute_meta_embeddings, meta_batch
from ..models.projection import ProjectionHead
from ..models.transformer import PathTransformer
from ..paths.augment import GraphAugmentor
from ..paths.walks import generate_positioned_paths, mask_path, neighbor_fn, positioned_path
from ..sampling.samplers import RandomSampler, make_sampler
from ._task_scheme import PretextTask, TaskContext
from .losses import loss_contrastive, reconstruction_loss


class GraphTask(PretextTask):
    """Shared body of the GNN tasks: meta aggregator, enhanced convolution, per-epoch sampling."""

    def build(self, rng):
        cfg = self.config
        self.aggregator = MetaAggregator(self.store, f"{self.task_id}/meta", cfg.dim, rng)
        self.gnn = GnnEncoder(self.store, f"{self.task_id}/gnn", cfg.dim, cfg.n_layers, rng, cfg.activation)
        self.meta_embs = np.zeros((self.graph.num_nodes, cfg.dim))
        self.sampler = None

    def fit_meta_aggregator(self, epochs: int) -> List[float]:
        '''
        Fit the meta aggregator (with the task table) on the training targets by 1 - cos
        against ground truth, then compute every node's meta embedding once and freeze it.
        '''
        targets = self.context.targets
        sets = [self.first_order(t) for t in targets]
        truth = self.ground_truth.rows(targets)
        losses = []
        for epoch in range(epochs):
            total = 0.0
            for idx in self.batches(len(targets), self.config.recon_batch, epoch, "meta"):
                total += len(idx) * self.optimize(lambda: reconstruction_loss(
                    meta_batch(self.aggregator, self.table, [sets[i] for i in idx]), truth[idx]))
            losses.append(total / max(len(targets), 1))
            logging.debug(f"{self.task_id}/meta\t{epoch}\t{losses[-1]:.6f}")
        self.meta_embs = compute_meta_embeddings(self.graph, self.table.value, self.aggregator,
                                                 self.config.k_intrinsic, self.config.seed)
        self.store.freeze(f"{self.task_id}/meta")
        return losses

    def make_sampler(self, fanout: Sequence[int]):
        return make_sampler(self.config.sampler, self.graph, tuple(fanout), None,
                            meta_embs=self.meta_embs, cur_embs=self.table.value.copy())

    def prepare(self):
        self.fit_meta_aggregator(self.config.meta_epochs)
        self.sampler = self.make_sampler(self.config.fanout_intrinsic)

    def training_trees(self, epoch: int) -> list:
        """one masked-neighborhood tree per target; current embeddings refresh every epoch"""
        if self.config.sampler == "dynamic":
            self.sampler.update(self.table.value.copy())
        return [self.sampler.sample(int(t), self.seed("tree", epoch, int(t)), first_order=self.first_order(t))
                for t in self.context.targets]

    def sample(self, nodes, fanout, seed):
        sampler = self.make_sampler(fanout)
        return [sampler.sample(int(n), derive_seed(seed, self.task_id, int(n))) for n in nodes]

    def encode(self, samples):
        return self.gnn(samples, self.table, self.meta_embs)

    def buffers(self):
        return {"meta_embs": self.meta_embs}

    def load_buffers(self, buffers):
        if "meta_embs" in buffers:
            self.meta_embs = np.asarray(buffers["meta_embs"], dtype=np.float64).copy()
            self.store.freeze(f"{self.task_id}/meta")


class ReconstructGraphTask(GraphTask):
    """Rg: predict the target's ground-truth embedding from its masked neighborhood."""
    task_id = "Rg"

    def train_epoch(self, epoch):
        return self.train_on(self.training_trees(epoch), epoch)

    def train_on(self, trees: list, epoch: int) -> float:
        targets = self.context.targets
        truth = self.ground_truth.rows(targets)
        total = 0.0
        for idx in self.batches(len(targets), self.config.recon_batch, epoch):
            total += len(idx) * self.optimize(
                lambda: reconstruction_loss(self.gnn([trees[i] for i in idx], self.table, self.meta_embs), truth[idx]))
        return total / max(len(targets), 1)


class ContrastGraphTask(GraphTask):
    """Cg: two augmented views of each neighborhood, NT-Xent over projected GNN encodings."""
    task_id = "Cg"

    def build(self, rng):
        super().build(rng)
        self.head = ProjectionHead(self.store, f"{self.task_id}/proj", self.config.dim, rng)
        self.augmentor = GraphAugmentor(self.graph, self.config.aug, self.config.a, self.config.b)

    def views(self, trees: list, epoch: int) -> List[Tuple]:
        pairs = []
        for tree in trees:
            first = self.augmentor.subgraph(tree, self.seed("view1", epoch, tree.target))
            second = self.augmentor.subgraph(tree, self.seed("view2", epoch, tree.target))
            if len(first.layers[1]) == 0 or len(second.layers[1]) == 0:
                self.skip()
                continue
            pairs.append((first, second))
        return pairs

    def train_epoch(self, epoch):
        pairs = self.views(self.training_trees(epoch), epoch)
        if not pairs:
            return 0.0
        total = 0.0
        for idx in self.batches(len(pairs), self.config.contrastive_batch, epoch):
            def forward():
                z1 = self.head(self.gnn([pairs[i][0] for i in idx], self.table, self.meta_embs))
                z2 = self.head(self.gnn([pairs[i][1] for i in idx], self.table, self.meta_embs))
                return loss_contrastive(z1, z2, self.config.tau)
            total += len(idx) * self.optimize(forward)
        return total / len(pairs)


class PathTask(PretextTask):
    """Shared body of the Transformer tasks: paths walk the target's masked neighborhood tree."""

    def build(self, rng):
        cfg = self.config
        self.transformer = PathTransformer(self.store, f"{self.task_id}/tr", cfg.dim, cfg.path_len,
                                           cfg.transformer_blocks, cfg.transformer_heads, rng)

    def tree(self, node: int, fanout: Sequence[int], seed: int, first_order=None):
        return RandomSampler(self.graph, tuple(fanout)).sample(int(node), seed, first_order=first_order)

    def training_tree(self, node: int, epoch: int):
        return self.tree(node, self.config.fanout_intrinsic, self.seed("tree", epoch, int(node)),
                         self.first_order(node))

    def read_out(self, tokens: list, positions: list) -> Tensor:
        return self.transformer.read_out(tokens, positions, self.table)

    def encode(self, samples):
        '''
        samples[n] is the list of paths for node n; the node embedding is the mean read-out
        at the node's position over its paths.
        '''
        tokens, positions, owners = [], [], []
        for n, paths in enumerate(samples):
            if not paths:
                raise EncoderError(f"no path for sample {n}")
            for p in paths:
                tokens.append(self.tokens_of(p))
                positions.append(self.position_of(p))
                owners.append(n)
        return ops.segment_mean(self.read_out(tokens, positions), np.array(owners), len(samples))

    def tokens_of(self, p) -> Tuple[int, ...]:
        return p.nodes

    def position_of(self, p) -> int:
        return p.anchor


class ReconstructPathTask(PathTask):
    """Rp: mask the target inside each of T positioned paths and reconstruct it."""
    task_id = "Rp"

    def tokens_of(self, p):
        return p.rendered

    def position_of(self, p):
        return p.mask_pos

    def masked_paths(self, tree, node: int, seed: int) -> list:
        found = generate_positioned_paths(tree, int(node), self.config.path_len, seed)
        return [mask_path(p, p.anchor) for p in found.paths]

    def train_epoch(self, epoch):
        targets = self.context.targets
        per_target = []
        for t in targets:
            masked = self.masked_paths(self.training_tree(t, epoch), t, self.seed("paths", epoch, int(t)))
            if not masked:
                self.skip()
            per_target.append(masked)
        truth = self.ground_truth.rows(targets)
        total, counted = 0.0, 0
        for idx in self.batches(len(targets), self.config.recon_batch, epoch):
            idx = [i for i in idx if per_target[i]]
            if not idx:
                continue
            paths = [p for i in idx for p in per_target[i]]
            rows = np.concatenate([np.repeat(truth[i][None, :], len(per_target[i]), axis=0) for i in idx])
            total += len(idx) * self.optimize(lambda: reconstruction_loss(
                self.read_out([p.rendered for p in paths], [p.mask_pos for p in paths]), rows))
            counted += len(idx)
        return total / max(counted, 1)

    def sample(self, nodes, fanout, seed):
        return [self.masked_paths(self.tree(n, fanout, derive_seed(seed, self.task_id, "tree", int(n))), n,
                                  derive_seed(seed, self.task_id, "paths", int(n))) for n in nodes]


class ContrastPathTask(PathTask):
    """Cp: one path per target at a random position, two augmented views, NT-Xent at the target's position."""
    task_id = "Cp"

    def build(self, rng):
        super().build(rng)
        self.head = ProjectionHead(self.store, f"{self.task_id}/proj", self.config.dim, rng)
        self.augmentor = GraphAugmentor(self.graph, self.config.aug, self.config.a, self.config.b)

    def view_pair(self, node: int, epoch: int):
        tree = self.training_tree(node, epoch)
        rng = make_rng(self.config.seed, self.task_id, "pos", epoch, int(node))
        path = positioned_path(neighbor_fn(tree), int(node), self.config.path_len,
                               int(rng.integers(self.config.path_len)), rng)
        if path is None:
            return None
        try:
            return (self.augmentor.path(path, self.seed("view1", epoch, int(node))),
                    self.augmentor.path(path, self.seed("view2", epoch, int(node))))
        except AugmentationError:
            return None

    def train_epoch(self, epoch):
        pairs = []
        for t in self.context.targets:
            pair = self.view_pair(int(t), epoch)
            if pair is None:
                self.skip()
                continue
            pairs.append(pair)
        if not pairs:
            return 0.0
        total = 0.0
        for idx in self.batches(len(pairs), self.config.contrastive_batch, epoch):
            def forward():
                first = [pairs[i][0] for i in idx]
                second = [pairs[i][1] for i in idx]
                z1 = self.head(self.read_out([p.nodes for p in first], [p.anchor for p in first]))
                z2 = self.head(self.read_out([p.nodes for p in second], [p.anchor for p in second]))
                return loss_contrastive(z1, z2, self.config.tau)
            total += len(idx) * self.optimize(forward)
        return total / len(pairs)

    def sample(self, nodes, fanout, seed):
        samples = []
        for n in nodes:
            tree = self.tree(n, fanout, derive_seed(seed, self.task_id, "tree", int(n)))
            samples.append(generate_positioned_paths(tree, int(n), self.config.path_len,
                                                     derive_seed(seed, self.task_id, "paths", int(n))).paths)
        return samples


TASKS: Dict[str, type] = {
    "Rg": ReconstructGraphTask,
    "Cg": ContrastGraphTask,
    "Rp": ReconstructPathTask,
    "Cp": ContrastPathTask,
}


def make_task(task_id: str, context: TaskContext) -> PretextTask:
    if task_id not in TASKS:
        raise ConfigError(f"unknown pretext task {task_id!r}, expected one of {list(TASKS)}")
    return TASKS[task_id](context)

