from .actions import (ABNORMAL_IDS, CLASSES, CLASS_BY_NAME, MASK_VOCABULARY,
                      NUM_CLASSES, PROTOCOL_PAIRS, SCENES, SCENE_BY_ID,
                      SCENE_ELEMENTS, SUBJECTS, SUBJECT_BY_ID)
from .generator import GeneratorConfig, SequenceSample, generate_dataset
from .io import (read_dataset, read_manifest, read_sequence, read_splits,
                 write_dataset, write_sequence, write_splits)
from .splits import SplitSpec, make_splits

__all__ = [
    "ABNORMAL_IDS", "CLASSES", "CLASS_BY_NAME", "MASK_VOCABULARY",
    "NUM_CLASSES", "PROTOCOL_PAIRS", "SCENES", "SCENE_BY_ID",
    "SCENE_ELEMENTS", "SUBJECTS", "SUBJECT_BY_ID",
    "GeneratorConfig", "SequenceSample", "generate_dataset",
    "read_dataset", "read_manifest", "read_sequence", "read_splits",
    "write_dataset", "write_sequence", "write_splits",
    "SplitSpec", "make_splits",
]
