"""Compact binary patch descriptors learned with a teacher-student setup.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from descdist._core import (  # noqa: F401
    __version__,
    basic_loss,
    benchmark_pairs,
    binarization_loss,
    binarize_pack,
    build_student,
    build_teacher,
    decode_keyframe,
    distill_binary,
    distill_real,
    encode_keyframe,
    encoded_size,
    eval_fpr95,
    generate_synthetic,
    hamming,
    load_network,
    load_store,
    Network,
    pairwise_distance_matrix,
    patch_to_input,
    profile,
    save_store,
    simulate,
    soft_sign,
    train_loss,
    train_student,
    train_teacher,
    triplet_hard_loss,
)
