from ._sampler_scheme import SamplerKind, NeighborSampler, TreeSampler
from .samplers import RandomSampler, ImportanceSampler, DynamicSampler, make_sampler, enhanced_scores
from .samplers import sample_random, sample_importance, sample_dynamic
