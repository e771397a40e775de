"""preshape_forge: synthetic eye-in-hand grasping sequences and scoring.

Generates domain-randomized tabletop scenes, minimum-jerk approach
trajectories labeled by part-box collision, small deterministic renders,
and evaluates per-frame pre-shape predictions with per-video majority
voting and oracle baselines.
"""

from .taxonomy import (  # noqa: F401
    GraspTaxonomy,
    GraspType,
    PreShape,
    load_taxonomy,
    modal_grasp,
    preshape_of,
)

__version__ = "0.1.0"
