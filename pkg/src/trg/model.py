"""Full segmentation model: spatial block, temporal backbone, refinements."""

from __future__ import annotations

from dataclasses import dataclass

from .nn import ChannelMap, Module
from .refine import BoundaryRefineStage, ClassRefineStage
from .spatial import SpatialBlock
from .temporal import TemporalBackbone


@dataclass
class StageOutputs:
    """Per-stage predictions plus the projected backbone representation.

    class_stages[0] / boundary_stages[0] come from the backbone heads; later
    entries are refinement outputs. representation is F^R (Ct x T), the
    projection the contrastive/graph supervision applies to.
    """

    class_stages: list
    boundary_stages: list
    representation: object

    @property
    def final_classes(self):
        return self.class_stages[-1]

    @property
    def final_boundaries(self):
        return self.boundary_stages[-1]


class SegmentationModel(Module):
    """End-to-end assembly; one forward processes one (C0, T, V) sequence."""

    def __init__(self, topology, joint_graph, n_classes, rng, c0, c=64, c1=16,
                 c2=8, c3=16, heads=4, c_t=768, temporal_layers=10, k_max=None,
                 class_stages=1, boundary_stages=2, refine_layers=10, dropout=0.5):
        if k_max is None:
            k_max = topology.diameter()
        self.spatial = SpatialBlock(topology, joint_graph, c0, c, c1, k_max, rng)
        self.backbone = TemporalBackbone(c, topology.n_joints, n_classes, rng,
                                         layers=temporal_layers, c2=c2, c3=c3,
                                         heads=heads, dropout=dropout)
        self.class_refine = [ClassRefineStage(n_classes, c, rng, layers=refine_layers,
                                              c3=c3, heads=heads, dropout=dropout)
                             for _ in range(class_stages)]
        self.boundary_refine = [BoundaryRefineStage(c, rng, layers=refine_layers,
                                                    dropout=dropout)
                                for _ in range(boundary_stages)]
        self.project = ChannelMap(c, c_t, rng)

    def __call__(self, x, rng, train):
        f_s = self.spatial(x, train)
        f_t, y_cls, y_bnd = self.backbone(f_s, rng, train)
        class_stages = [y_cls]
        context = f_t
        for stage in self.class_refine:
            probs, context = stage(class_stages[-1], context, rng, train)
            class_stages.append(probs)
        boundary_stages = [y_bnd]
        for stage in self.boundary_refine:
            boundary_stages.append(stage(boundary_stages[-1], rng, train))
        return StageOutputs(class_stages=class_stages,
                            boundary_stages=boundary_stages,
                            representation=self.project(f_t))
