"""Cross-embodiment grasp articulation: URDF tokens, kinematics, eigengrasps,
grasp evaluation and model inference."""

from ._core import (
    CrossgraspError,
    HandModel,
    decode_articulation,
    encode_amplitudes,
    evaluate_grasp,
    fingertip_jacobian,
    fingertip_links,
    forward_kinematics,
    kal_weights,
    load_dataset,
    load_urdf,
    parse_urdf,
    pca_eigengrasps,
    predict_articulation,
    synth_hand_urdf,
    tokenize,
    write_untrained_checkpoint,
)

__all__ = [
    "CrossgraspError",
    "HandModel",
    "decode_articulation",
    "encode_amplitudes",
    "evaluate_grasp",
    "fingertip_jacobian",
    "fingertip_links",
    "forward_kinematics",
    "kal_weights",
    "load_dataset",
    "load_urdf",
    "parse_urdf",
    "pca_eigengrasps",
    "predict_articulation",
    "synth_hand_urdf",
    "tokenize",
    "write_untrained_checkpoint",
]
