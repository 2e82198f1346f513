"""Sentence generation: golden sentences, adverb/adjunct thresholds,
referring expressions, determiners, anaphora, and spatial relations."""

import math

import numpy as np
import pytest

from narrator.classifier import ActionEntry, ActionModelBank, ObjectStats
from narrator.config import Config
from narrator.errors import GenerationError
from narrator.features import ClassRegistry
from narrator.lexicon import ALL_WORDS
from narrator.nlg import (
    choose_adverb,
    choose_adjunct,
    choose_object_form,
    generate_sentence,
    plan_noun_phrases,
    quadrant,
    spatial_pp,
    subject_motion,
    track_color,
)
from narrator.scene import BoundingBox, Detection
from narrator.tracking import Track, smooth_track


def make_track(track_id, centers, cls="chair", w=12.0, h=12.0, scores=None,
               parts=None, hsv=None, fps=30.0):
    sels = []
    for t, (cx, cy) in enumerate(centers):
        sels.append(Detection(
            frame=t, object_class=cls,
            score=scores[t] if scores else 1.0,
            box=BoundingBox(float(cx), float(cy), w, h),
            parts=tuple(parts) if parts else (),
            hsv=hsv,
        ))
    track = Track(track_id=track_id, object_class=cls, start=0, fps=fps,
                  selections=sels, smoothed_boxes=[])
    return smooth_track(track, 1)


def bank_with(entries=None, stats=None):
    return ActionModelBank(
        entries=entries or {}, object_stats=stats or {}, codebook=None,
        class_registry=ClassRegistry(), ablation_name="full", n_parts=0,
        max_roots=4,
    )


def entry(verb, v1=0.0, v2=0.0, v3=0.0):
    return ActionEntry(verb=verb, v1=v1, v2=v2, v3=v3)


NOISY = [0.0, 2.0] * 50          # score variance 1.0: suppresses size/shape
PERSON_PARTS = [(0.0, -40.0), (0.0, -10.0), (-7.0, 42.0), (7.0, 42.0)]


def out_and_back(x0, y0, step, n_half):
    """High per-frame speed, near-zero average velocity vector."""
    out = [(x0 + step * t, y0) for t in range(n_half)]
    back = [(x0 + step * (n_half - 1) - step * t, y0) for t in range(1, n_half)]
    return out + back


def stationary(x0, y0, n):
    return [(x0, y0)] * n


def vocab_ok(sentence):
    words = sentence[:-1].split()
    words[0] = words[0][0].lower() + words[0][1:]
    return all(w in ALL_WORDS for w in words)


# --- golden sentences ---------------------------------------------------------

def test_golden_jumped_over_the_ball():
    person = make_track(0, out_and_back(100.0, 100.0, 10.0, 11), cls="person",
                        w=46, h=110)
    ball = make_track(1, stationary(200.0, 140.0, 21), cls="small-ball",
                      w=36, h=36, scores=NOISY[:21])
    bank = bank_with({"jumped": entry("jumped", v1=50.0, v2=1000.0, v3=80.0)})
    got = generate_sentence("jumped", person, ball, bank)
    assert got == "The person jumped over the ball."
    assert vocab_ok(got)


def test_golden_red_ball_collided_with_blue_ball():
    red = make_track(0, out_and_back(100.0, 100.0, 8.0, 11), cls="small-ball",
                     w=36, h=36, scores=NOISY[:21], hsv=(0.0, 1.0, 0.5))
    blue = make_track(1, stationary(220.0, 100.0, 21), cls="small-ball",
                      w=36, h=36, scores=NOISY[:21], hsv=(240.0, 1.0, 0.5))
    bank = bank_with({"collided": entry("collided", v1=50.0, v2=1000.0, v3=80.0)})
    got = generate_sentence("collided", red, blue, bank)
    assert got == "The red ball collided with the blue ball."
    assert vocab_ok(got)


def test_golden_some_person_to_the_right_of_some_other_person():
    agent = make_track(0, stationary(300.0, 100.0, 15), cls="person", w=46, h=110)
    patient = make_track(1, stationary(100.0, 100.0, 15), cls="person", w=46, h=110)
    bank = bank_with({"approached": entry("approached", v1=10.0, v2=100.0, v3=20.0)})
    got = generate_sentence("approached", agent, patient, bank)
    assert got == ("Some person to the right of some other person approached "
                   "that other person.")
    assert vocab_ok(got)


def test_golden_upright_person_hit_the_big_ball():
    person = make_track(0, [(100.0 + 4 * t, 100.0) for t in range(20)],
                        cls="person", w=46, h=110, parts=PERSON_PARTS)
    ball = make_track(1, stationary(220.0, 130.0, 20), cls="big-ball", w=90, h=90)
    bank = bank_with({"hit": entry("hit", v1=10.0, v2=500.0, v3=20.0)})
    got = generate_sentence("hit", person, ball, bank)
    assert got == "The upright person hit the big ball."
    assert vocab_ok(got)


def test_went_away_leftward_with_spatial_pp():
    # mostly stationary next to the motorcycle, then a fast exit leftward:
    # the average speed stays under v1 (spatial PP fires) while the filtered
    # average velocity is fast and leftward (adjunct fires)
    centers = stationary(400.0, 300.0, 70) + [(400.0 - 8.0 * t, 300.0)
                                              for t in range(1, 11)]
    person = make_track(0, centers, cls="person", w=46, h=110, parts=PERSON_PARTS)
    moto = make_track(1, stationary(250.0, 300.0, 80), cls="motorcycle",
                      w=90, h=60)
    bank = bank_with({"went": entry("went", v1=50.0, v2=400.0, v3=100.0)})
    got = generate_sentence("went", person, moto, bank)
    assert got == ("The upright person to the right of the motorcycle went "
                   "away leftward.")
    assert vocab_ok(got)


def test_paper_style_that_car_coreference():
    person = make_track(0, stationary(300.0, 100.0, 15), cls="person", w=46, h=110)
    car = make_track(1, stationary(100.0, 100.0, 15), cls="car", w=120, h=60)
    bank = bank_with({"approached": entry("approached", v1=10.0, v2=100.0, v3=20.0)})
    got = generate_sentence("approached", person, car, bank)
    assert got == "The person to the right of the car approached that car."


def test_some_car_approached_some_other_car():
    agent = make_track(0, out_and_back(100.0, 100.0, 8.0, 11), cls="car",
                       w=120, h=60)
    patient = make_track(1, stationary(300.0, 100.0, 21), cls="car", w=120, h=60)
    bank = bank_with({"approached": entry("approached", v1=50.0, v2=1000.0, v3=80.0)})
    got = generate_sentence("approached", agent, patient, bank)
    assert got == "Some car approached some other car."


# --- motion summaries -----------------------------------------------------------

def test_subject_motion_stationary():
    track = make_track(0, stationary(10.0, 10.0, 10))
    assert subject_motion(track, 5.0) == (0.0, 0.0)


def test_subject_motion_uniform_rightward():
    track = make_track(0, [(10.0 + t * (100.0 / 30.0), 50.0) for t in range(10)])
    v, orient = subject_motion(track, 10.0)
    assert v == pytest.approx(100.0, rel=1e-6)
    assert orient == pytest.approx(0.0, abs=1e-9)


def test_subject_motion_cancels_on_out_and_back():
    track = make_track(0, out_and_back(0.0, 0.0, 10.0, 11))
    v, _ = subject_motion(track, 50.0)
    speeds = np.hypot(*np.diff(np.array(out_and_back(0.0, 0.0, 10.0, 11)), axis=0).T)
    assert speeds.min() * 30.0 > 50.0      # every frame passes the filter
    assert v < 40.0                        # but the vector average cancels


def test_adverb_thresholds_and_boundaries():
    assert choose_adverb(10.0, 100.0, 20.0, 150.0) == "quickly"
    assert choose_adverb(10.0, 100.0, 20.0, 100.0) is None   # v == v2: strict
    assert choose_adverb(10.0, 100.0, 20.0, 15.0) == "slowly"
    assert choose_adverb(10.0, 100.0, 20.0, 10.0) == "slowly"  # inclusive at v1
    assert choose_adverb(10.0, 100.0, 20.0, 20.0) == "slowly"  # inclusive at v3
    assert choose_adverb(10.0, 100.0, 20.0, 5.0) is None       # below v1
    assert choose_adverb(10.0, 100.0, 20.0, 50.0) is None      # dead band


def test_template_without_adverb_slot_suppresses_adverb():
    agent = make_track(0, [(10.0 + 9 * t, 50.0) for t in range(12)], cls="person",
                       w=46, h=110)
    patient = make_track(1, stationary(300.0, 50.0, 12), cls="bag", w=44, h=52)
    bank = bank_with({"had": entry("had", v1=1.0, v2=2.0, v3=1.5)})
    got = generate_sentence("had", agent, patient, bank)
    assert "slowly" not in got and "quickly" not in got
    assert got == "The person had the bag."


def test_adjunct_rules():
    assert choose_adjunct("endo", 100.0, 10.0, 0.0) == "rightward"
    assert choose_adjunct("endo", 100.0, 10.0, math.pi / 2) == "upward"
    assert choose_adjunct("exo", 100.0, 10.0, 0.0) == "from the left"
    assert choose_adjunct("exo", 100.0, 10.0, math.pi) == "from the right"
    assert choose_adjunct("endo", 5.0, 10.0, 0.0) is None   # v < v1
    assert choose_adjunct(None, 100.0, 10.0, 0.0) is None   # no slot
    assert choose_adjunct("endo", 10.0, 10.0, 0.0) == "rightward"  # v == v1 kept


def test_quadrant_boundaries_tie_to_horizontal():
    assert quadrant(math.radians(45.0)) == "right"
    assert quadrant(math.radians(46.0)) == "up"
    assert quadrant(math.radians(-45.0)) == "right"
    assert quadrant(math.radians(135.0)) == "left"
    assert quadrant(math.radians(-135.0)) == "left"
    assert quadrant(math.radians(180.0)) == "left"


# --- spatial relations -----------------------------------------------------------

def test_spatial_pp_directions():
    left = make_track(0, stationary(100.0, 100.0, 10))
    right = make_track(1, stationary(300.0, 100.0, 10))
    above = make_track(2, stationary(100.0, 40.0, 10))
    assert spatial_pp(left, right, v1=5.0) == "to the left of"
    assert spatial_pp(right, left, v1=5.0) == "to the right of"
    assert spatial_pp(above, left, v1=5.0) == "above"
    assert spatial_pp(left, above, v1=5.0) == "below"


def test_spatial_pp_requires_both_stationary():
    mover = make_track(0, [(100.0 + 5 * t, 100.0) for t in range(10)])
    still = make_track(1, stationary(300.0, 100.0, 10))
    assert spatial_pp(mover, still, v1=5.0) is None
    assert spatial_pp(still, mover, v1=5.0) is None


# --- object forms ------------------------------------------------------------------

def test_one_track_anaphora():
    assert choose_object_form("attached", None) == "pronoun:themselves"
    assert choose_object_form("raised", None) == "pronoun:themselves"
    assert choose_object_form("moved", None) == "pronoun:itself"
    assert choose_object_form("buried", None) == "pronoun:something"


def test_entered_non_enterable_patient_is_pronoun():
    chair = make_track(1, stationary(0.0, 0.0, 5), cls="chair")
    car = make_track(1, stationary(0.0, 0.0, 5), cls="car")
    assert choose_object_form("entered", chair) == "pronoun:something"
    assert choose_object_form("entered", car) == "np"
    assert choose_object_form("exited", car) == "np"


def test_received_handover_material():
    # out-and-back motion keeps the agent non-stationary (no spatial PP) while
    # its average velocity cancels (no adjunct interference)
    agent = make_track(0, out_and_back(10.0, 10.0, 8.0, 6), cls="person",
                       w=46, h=110)
    mailbox = make_track(1, stationary(60.0, 10.0, 11), cls="mailbox", w=40, h=70)
    chair = make_track(1, stationary(60.0, 10.0, 11), cls="chair")
    bank = bank_with({"received": entry("received", v1=100.0, v2=300.0, v3=200.0)})
    with_mailbox = generate_sentence("received", agent, mailbox, bank)
    assert with_mailbox == "The person received an object from the mailbox."
    without = generate_sentence("received", agent, chair, bank)
    assert without == "The person received the chair."
    one_track = generate_sentence("received", agent, None, bank)
    assert one_track == "The person received something."


def test_one_track_reflexives_render():
    agent = make_track(0, stationary(10.0, 10.0, 10), cls="person", w=46, h=110)
    bank = bank_with({"attached": entry("attached", v1=1.0, v2=3.0, v3=2.0),
                      "moved": entry("moved", v1=1.0, v2=3.0, v3=2.0),
                      "hit": entry("hit", v1=1.0, v2=3.0, v3=2.0)})
    assert generate_sentence("attached", agent, None, bank) == \
        "The person attached an object to themselves."
    assert generate_sentence("moved", agent, None, bank) == "The person moved itself."
    assert generate_sentence("hit", agent, None, bank) == "The person hit something."


def test_optional_y_groups_only_for_two_tracks():
    agent = make_track(0, out_and_back(10.0, 10.0, 8.0, 6), cls="person",
                       w=46, h=110)
    bank = bank_with({"fled": entry("fled", v1=100.0, v2=300.0, v3=200.0),
                      "stopped": entry("stopped", v1=100.0, v2=300.0, v3=200.0)})
    assert generate_sentence("fled", agent, None, bank) == "The person fled."
    dog = make_track(1, stationary(80.0, 10.0, 11), cls="dog", w=70, h=48)
    assert generate_sentence("fled", agent, dog, bank) == \
        "The person fled from the dog."
    assert generate_sentence("stopped", agent, None, bank) == "The person stopped."
    assert generate_sentence("stopped", agent, dog, bank) == \
        "The person stopped the dog."


# --- approached/fled subject swap ---------------------------------------------------

def test_approached_swap_when_agent_stationary_and_patient_moves():
    still_agent = make_track(0, stationary(300.0, 100.0, 21), cls="person",
                             w=46, h=110)
    moving_patient = make_track(1, out_and_back(100.0, 100.0, 8.0, 11),
                                cls="car", w=120, h=60)
    bank = bank_with({"approached": entry("approached", v1=50.0, v2=1000.0, v3=80.0)})
    got = generate_sentence("approached", still_agent, moving_patient, bank)
    # the moving patient is promoted to subject
    assert got == "The car approached the person."


def test_no_swap_for_other_verbs():
    still_agent = make_track(0, stationary(300.0, 100.0, 21), cls="person",
                             w=46, h=110)
    mover = make_track(1, out_and_back(100.0, 100.0, 8.0, 11), cls="car",
                       w=120, h=60)
    bank = bank_with({"followed": entry("followed", v1=50.0, v2=1000.0, v3=80.0)})
    got = generate_sentence("followed", still_agent, mover, bank)
    assert got.startswith("The person followed")


# --- adjectives ----------------------------------------------------------------------

def test_color_requires_strong_evidence():
    vivid = make_track(0, stationary(0, 0, 5), hsv=(120.0, 0.9, 0.5))
    pale = make_track(0, stationary(0, 0, 5), hsv=(120.0, 0.3, 0.5))
    dark = make_track(0, stationary(0, 0, 5), hsv=(120.0, 0.9, 0.1))
    bright = make_track(0, stationary(0, 0, 5), hsv=(120.0, 0.1, 0.9))
    cfg = Config()
    assert track_color(vivid, cfg) == "green"
    assert track_color(pale, cfg) is None
    assert track_color(dark, cfg) == "black"
    assert track_color(bright, cfg) == "white"


def test_hue_bins():
    cfg = Config()
    for hue, name in ((0, "red"), (350, "red"), (60, "yellow"), (120, "green"),
                      (180, "teal"), (240, "blue"), (300, "pink")):
        track = make_track(0, stationary(0, 0, 5), hsv=(float(hue), 1.0, 0.5))
        assert track_color(track, cfg) == name


def test_color_not_emitted_without_coreference_need():
    ball = make_track(0, stationary(0.0, 0.0, 21), cls="small-ball", w=36, h=36,
                      scores=NOISY[:21], hsv=(0.0, 1.0, 0.5))
    chair = make_track(1, stationary(100.0, 0.0, 21), cls="chair",
                       scores=NOISY[:21])
    plans = plan_noun_phrases([ball, chair], bank_with())
    assert "color" not in plans[0].adjectives
    assert plans[0].determiner == "the"


def test_stats_based_size_and_shape_with_ordering():
    stats = {"chair": ObjectStats(mean_area=100.0, mean_aspect=1.0,
                                  alpha=0.8, beta=1.2)}
    big_wide = make_track(0, stationary(0, 0, 10), cls="chair", w=18.0, h=12.0)
    plans = plan_noun_phrases([big_wide], bank_with(stats=stats))
    plan = plans[0]
    assert plan.adjectives["size"] == "big"
    assert plan.adjectives["shape"] == "wide"
    assert plan.adjective_words() == ("big", "wide")
    small_tall = make_track(0, stationary(0, 0, 10), cls="chair", w=6.0, h=10.0)
    plan = plan_noun_phrases([small_tall], bank_with(stats=stats))[0]
    assert plan.adjectives["size"] == "small"
    assert plan.adjectives["shape"] == "narrow"


def test_unstable_track_suppresses_size_and_shape():
    stats = {"chair": ObjectStats(mean_area=100.0, mean_aspect=1.0,
                                  alpha=0.8, beta=1.2)}
    shaky = make_track(0, stationary(0, 0, 100), cls="chair", w=18.0, h=12.0,
                       scores=NOISY)
    plan = plan_noun_phrases([shaky], bank_with(stats=stats))[0]
    assert "size" not in plan.adjectives
    assert "shape" not in plan.adjectives


def test_pose_adjective_needs_part_coverage():
    bare = make_track(0, stationary(0, 0, 10), cls="person", w=46, h=110)
    plan = plan_noun_phrases([bare], bank_with())[0]
    assert "restrictive" not in plan.adjectives
    covered = make_track(0, stationary(0, 0, 10), cls="person", w=46, h=110,
                         parts=PERSON_PARTS)
    plan = plan_noun_phrases([covered], bank_with())[0]
    assert plan.adjectives["restrictive"] == "upright"


def test_nonhuman_restrictive_always_applies():
    box = make_track(0, stationary(0, 0, 10), cls="cardboard-box", w=40, h=40,
                     scores=NOISY[:10])
    plan = plan_noun_phrases([box], bank_with())[0]
    assert plan.adjectives["restrictive"] == "cardboard"
    assert plan.head == "box"


def test_same_class_participants_never_identical():
    a = make_track(0, stationary(0, 0, 10), cls="dog", w=70, h=48)
    b = make_track(1, stationary(90, 0, 10), cls="dog", w=70, h=48)
    plans = plan_noun_phrases([a, b], bank_with())
    np_a = (plans[0].determiner,) + plans[0].adjective_words() + (plans[0].head,)
    np_b = (plans[1].determiner,) + plans[1].adjective_words() + (plans[1].head,)
    assert np_a != np_b
    assert "other" in plans[1].adjectives
    assert plans[0].determiner == "some"


def test_unknown_verb_and_missing_agent_rejected():
    track = make_track(0, stationary(0, 0, 10))
    with pytest.raises(GenerationError):
        generate_sentence("yodeled", track, None, bank_with())
    with pytest.raises(GenerationError):
        generate_sentence("hit", None, track, bank_with())
