"""Closed-class lexical data: the generation vocabulary, the object-class
table (nouns and adjective mappings), and the sentential templates.

Everything downstream that touches words goes through this module, so the
whole surface vocabulary of the system is auditable in one place.
"""

from __future__ import annotations

from dataclasses import dataclass

VOCABULARY: dict[str, tuple[str, ...]] = {
    "coordination": ("and",),
    "verb": (
        "approached", "arrived", "attached", "bounced", "buried", "carried",
        "caught", "chased", "closed", "collided", "digging", "dropped",
        "entered", "exchanged", "exited", "fell", "fled", "flew", "followed",
        "gave", "got", "had", "handed", "hauled", "held", "hit", "jumped",
        "kicked", "left", "lifted", "moved", "opened", "passed", "picked",
        "pushed", "put", "raised", "ran", "received", "replaced", "snatched",
        "stopped", "threw", "took", "touched", "turned", "walked", "went",
    ),
    "noun": (
        "bag", "ball", "bench", "bicycle", "box", "cage", "car", "cart",
        "chair", "dog", "door", "ladder", "left", "mailbox", "microwave",
        "motorcycle", "object", "person", "right", "skateboard", "SUV",
        "table", "tripod", "truck",
    ),
    "adjective": (
        "big", "black", "blue", "cardboard", "crouched", "green", "narrow",
        "other", "pink", "prone", "red", "short", "small", "tall", "teal",
        "toy", "upright", "white", "wide", "yellow",
    ),
    "preposition": ("above", "because", "below", "from", "of", "over", "to", "with"),
    "lexical_pp": ("downward", "leftward", "rightward", "upward"),
    "determiner": ("an", "some", "that", "the"),
    "particle": ("away", "down", "up"),
    "pronoun": ("itself", "something", "themselves"),
    "adverb": ("quickly", "slowly"),
    "auxiliary": ("was",),
}

ALL_WORDS: frozenset[str] = frozenset(w for ws in VOCABULARY.values() for w in ws)


@dataclass(frozen=True)
class ObjectClassEntry:
    """Noun and adjective mappings for one detectable object class."""

    noun: str
    restrictive: str | None = None
    size: str | None = None
    person_pose: bool = False


# The 25 trained object classes.  Person classes carry pose adjectives as
# their restrictive modifier; they all surface as the noun "person".
OBJECT_CLASSES: dict[str, ObjectClassEntry] = {
    "bag": ObjectClassEntry("bag"),
    "bench": ObjectClassEntry("bench"),
    "bicycle": ObjectClassEntry("bicycle"),
    "big-ball": ObjectClassEntry("ball", size="big"),
    "cage": ObjectClassEntry("cage"),
    "car": ObjectClassEntry("car"),
    "cardboard-box": ObjectClassEntry("box", restrictive="cardboard"),
    "cart": ObjectClassEntry("cart"),
    "chair": ObjectClassEntry("chair"),
    "dog": ObjectClassEntry("dog"),
    "door": ObjectClassEntry("door"),
    "ladder": ObjectClassEntry("ladder"),
    "mailbox": ObjectClassEntry("mailbox"),
    "microwave": ObjectClassEntry("microwave"),
    "motorcycle": ObjectClassEntry("motorcycle"),
    "person": ObjectClassEntry("person", restrictive="upright", person_pose=True),
    "person-crouch": ObjectClassEntry("person", restrictive="crouched", person_pose=True),
    "person-down": ObjectClassEntry("person", restrictive="prone", person_pose=True),
    "skateboard": ObjectClassEntry("skateboard"),
    "small-ball": ObjectClassEntry("ball", size="small"),
    "suv": ObjectClassEntry("SUV"),
    "table": ObjectClassEntry("table"),
    "toy-truck": ObjectClassEntry("truck", restrictive="toy"),
    "tripod": ObjectClassEntry("tripod"),
    "truck": ObjectClassEntry("truck"),
}

PERSON_CLASSES: frozenset[str] = frozenset(
    name for name, e in OBJECT_CLASSES.items() if e.person_pose
)

# Pooled person detections are tracked under this single stream name.
POOLED_PERSON_CLASS = "person"

# Fallback head noun for extension classes that have no table entry.
DEFAULT_NOUN = "object"


def noun_for(object_class: str) -> str:
    entry = OBJECT_CLASSES.get(object_class)
    return entry.noun if entry is not None else DEFAULT_NOUN


def pooled_class(object_class: str) -> str:
    """Collapse the pose-specific person classes into one tracking stream."""
    return POOLED_PERSON_CLASS if object_class in PERSON_CLASSES else object_class


# Sentential templates, one per action class.  Markup:
#   X            subject noun phrase
#   Y            object noun phrase (required when unbracketed)
#   [Adv]        optional adverb slot at this position
#   [PP_endo]    optional motion adjunct, subject perspective (leftward, ...)
#   [PP_exo]     optional motion adjunct, viewer perspective (from the left, ...)
#   [...]        optional group; groups containing Y are only instantiated for
#                two-participant events, fixed-word groups follow per-verb rules
TEMPLATES: dict[str, str] = {
    "approached": "X [Adv] approached Y [PP_exo]",
    "arrived": "X arrived [Adv] [PP_exo]",
    "attached": "X [Adv] attached an object to Y",
    "bounced": "X bounced [Adv] [PP_endo]",
    "buried": "X buried Y",
    "carried": "X [Adv] carried Y [PP_endo]",
    "caught": "X caught Y [PP_exo]",
    "chased": "X [Adv] chased Y [PP_endo]",
    "closed": "X closed Y",
    "collided": "X [Adv] collided with Y [PP_exo]",
    "digging": "X was digging [with Y]",
    "dropped": "X dropped Y",
    "entered": "X [Adv] entered Y [PP_endo]",
    "exchanged": "X [Adv] exchanged an object with Y",
    "exited": "X [Adv] exited Y [PP_endo]",
    "fell": "X fell [Adv] [because of Y] [PP_endo]",
    "fled": "X fled [Adv] [from Y] [PP_endo]",
    "flew": "X flew [Adv] [PP_endo]",
    "followed": "X [Adv] followed Y [PP_endo]",
    "gave": "X gave an object to Y",
    "got": "X got an object from Y",
    "had": "X had Y",
    "handed": "X handed Y an object",
    "hauled": "X [Adv] hauled Y [PP_endo]",
    "held": "X held Y",
    "hit": "X hit [something with] Y",
    "jumped": "X jumped [Adv] [over Y] [PP_endo]",
    "kicked": "X [Adv] kicked Y [PP_endo]",
    "left": "X left [Adv] [PP_endo]",
    "lifted": "X [Adv] lifted Y",
    "moved": "X [Adv] moved Y [PP_endo]",
    "opened": "X opened Y",
    "passed": "X [Adv] passed Y [PP_exo]",
    "picked": "X picked Y up",
    "pushed": "X [Adv] pushed Y [PP_endo]",
    "put": "X put Y down",
    "raised": "X raised Y",
    "received": "X received [an object from] Y",
    "replaced": "X [Adv] replaced Y",
    "ran": "X ran [Adv] [to Y] [PP_endo]",
    "snatched": "X [Adv] snatched an object from Y",
    "stopped": "X [Adv] stopped [Y]",
    "threw": "X [Adv] threw Y [PP_endo]",
    "took": "X [Adv] took an object from Y",
    "touched": "X touched Y",
    "turned": "X turned [PP_endo]",
    "walked": "X walked [Adv] [to Y] [PP_endo]",
    "went": "X went [Adv] away [PP_endo]",
}

ACTION_CLASSES: tuple[str, ...] = VOCABULARY["verb"]

# Anaphor choices when a required Y is instantiated for a one-participant event.
REFLEXIVE_THEMSELVES = frozenset({"attached", "raised"})
REFLEXIVE_ITSELF = frozenset({"moved"})

# entered/exited take a real object NP only for enterable vehicle/portal classes.
ENTERABLE_CLASSES = frozenset({"car", "door", "suv", "truck"})

# received spells out "an object from Y" only for classes that can hand over.
HANDOVER_SOURCE_CLASSES = frozenset({"mailbox", "person", "person-crouch", "person-down"})
