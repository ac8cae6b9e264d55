"""Action vocabulary, subject profiles, and scene layouts.

The four scene-associated classes come in two motion-family pairs: hit and
hit_window share the strike family, climb and climb_wall share the climb
family. Members of a pair are indistinguishable from skeletons alone and
differ only in which scene element the body coincides with. Scene layouts
move the window and shift every depth between scenes so absolute positions
and absolute depths learned on scene I do not carry over; within a scene
the furniture rectangle is re-placed and the window shifted per clip, so
element coincidence (not element position) is the only reliable cue.

Normal-action clips in the primary scene additionally carry habitual
context: each normal class is recorded with the furniture in a
class-typical column and depth band (people sit by the couch, crouch by
the shelf). The association is a property of that scene's recordings
only; the held-out scenes place furniture freely, so the context is a
crisp shortcut within scene I and worthless elsewhere. Only motion
generalizes for normal classes.
"""

from dataclasses import dataclass

MASK_BACKGROUND = 0
MASK_HUMAN = 1
MASK_WALL = 2
MASK_WINDOW = 3
MASK_FLOOR = 4
MASK_FURNITURE = 5

SCENE_ELEMENTS = (
    ("wall", MASK_WALL),
    ("window", MASK_WINDOW),
    ("floor", MASK_FLOOR),
    ("furniture", MASK_FURNITURE),
)
MASK_VOCABULARY = (MASK_BACKGROUND, MASK_HUMAN) + tuple(i for _, i in SCENE_ELEMENTS)


@dataclass(frozen=True)
class ActionClass:
    id: int
    name: str
    scene_association: int
    family: str


CLASSES = (
    ActionClass(0, "crouch", 0, "crouch"),
    ActionClass(1, "stand", 0, "stand"),
    ActionClass(2, "sit", 0, "sit"),
    ActionClass(3, "hand_wave", 0, "wave"),
    ActionClass(4, "walk", 0, "walk"),
    ActionClass(5, "run", 0, "run"),
    ActionClass(6, "climb_wall", 1, "climb"),
    ActionClass(7, "hit_window", 1, "strike"),
    ActionClass(8, "climb", 1, "climb"),
    ActionClass(9, "hit", 1, "strike"),
)
CLASS_BY_NAME = {c.name: c for c in CLASSES}
NUM_CLASSES = len(CLASSES)
ABNORMAL_IDS = tuple(c.id for c in CLASSES if c.scene_association)

FAMILY_IDS = {
    "stand": 0,
    "crouch": 1,
    "sit": 2,
    "wave": 3,
    "walk": 4,
    "run": 5,
    "strike": 6,
    "climb": 7,
}


@dataclass(frozen=True)
class SubjectProfile:
    id: str
    limb_scale: float
    tempo: float
    jitter_std: float


SUBJECTS = (
    SubjectProfile("A", 1.00, 1.00, 0.5),
    SubjectProfile("B", 0.85, 1.25, 0.8),
    SubjectProfile("C", 1.15, 0.80, 0.4),
    SubjectProfile("D", 0.75, 1.50, 1.2),
    SubjectProfile("E", 1.25, 0.65, 0.9),
)
SUBJECT_BY_ID = {s.id: s for s in SUBJECTS}


@dataclass(frozen=True)
class SceneLayout:
    """Scene geometry; coordinates are fractions of W or H.

    window_u is the nominal window extent; each clip shifts it by up to
    window_jitter so absolute window positions carry no class signal even
    within a scene. For abnormal clips the furniture rectangle is sampled
    per clip (u center from furn_u_range, depth from furn_depth_range) and
    pushed clear of the window column. bare_u_range is wall area clear of
    the window under any jitter, used to anchor climbs on the bare wall.

    habit_slots, when non-empty, maps each normal class id to one of six
    furniture configurations (three columns times two depth bands) used
    when that class is recorded in this scene; the furniture configuration
    then predicts the normal class within the scene. Scenes with empty
    habit_slots place furniture for normal clips uniformly, so the
    association does not carry over to them.
    """

    id: str
    ceil_frac: float
    floor_frac: float
    wall_depth: float
    window_u: tuple
    window_v: tuple
    window_jitter: float
    furn_u_range: tuple
    furn_half_width: float
    furn_v: tuple
    furn_depth_range: tuple
    bare_u_range: tuple
    habit_slots: tuple


SCENES = (
    SceneLayout("I", 0.08, 0.72, 4.0,
                (0.18, 0.46), (0.25, 0.70), 0.08,
                (0.16, 0.64), 0.11, (0.30, 0.72), (1.6, 3.4),
                (0.60, 0.90), (0, 1, 2, 3, 4, 5)),
    SceneLayout("II", 0.05, 0.68, 7.0,
                (0.52, 0.80), (0.20, 0.66), 0.08,
                (0.30, 0.76), 0.10, (0.26, 0.68), (3.2, 6.4),
                (0.08, 0.40), ()),
    SceneLayout("III", 0.10, 0.78, 2.8,
                (0.34, 0.64), (0.28, 0.74), 0.06,
                (0.18, 0.66), 0.12, (0.34, 0.78), (1.1, 2.4),
                (0.74, 0.92), ()),
)
SCENE_BY_ID = {s.id: s for s in SCENES}

# Subject-scene recording pairs: subjects A/B/C/D in scene I, A/E in
# scene II, A in scene III. Training pools draw from the first three.
PROTOCOL_PAIRS = (
    ("A", "I"), ("B", "I"), ("C", "I"), ("D", "I"),
    ("A", "II"), ("E", "II"), ("A", "III"),
)
TRAIN_POOL_SUBJECTS = ("A", "B", "C")
SETTING1_SUBJECT = "D"
TRAIN_SCENE = "I"
