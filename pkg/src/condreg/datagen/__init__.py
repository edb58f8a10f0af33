from .synth import (
    MANIFEST_VERSION,
    PairRecord,
    PairSpec,
    generate_pair,
    load_manifest,
    load_pair,
    make_dataset,
    pairs_for_split,
)

__all__ = [
    "MANIFEST_VERSION",
    "PairRecord",
    "PairSpec",
    "generate_pair",
    "load_manifest",
    "load_pair",
    "make_dataset",
    "pairs_for_split",
]
