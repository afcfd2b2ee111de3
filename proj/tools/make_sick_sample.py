#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Generate a synthetic corpus in SICK's tab-separated layout.

Pairs are built from templates. Labels follow fixed rules (paraphrase or
hypernym swap -> ENTAILMENT, negation or "nobody" -> CONTRADICTION, a different
action or subject -> NEUTRAL), and relatedness grows with shared content.
"""
import argparse
import random

SUBJECTS = [("man", "person"), ("woman", "person"), ("boy", "child"), ("girl", "child"),
            ("dog", "animal"), ("cat", "animal"), ("chef", "cook"), ("player", "athlete")]
ACTIONS = [("playing a guitar", "playing an instrument"), ("riding a bike", "riding a bicycle"),
           ("cutting an onion", "slicing an onion"), ("running on the beach", "running by the sea"),
           ("eating a pizza", "eating some food"), ("jumping into a pool", "jumping into water"),
           ("reading a book", "looking at a book"), ("climbing a rock", "climbing a cliff"),
           ("dancing on a stage", "dancing in front of people"), ("swimming in a lake", "swimming in water")]
PLACES = ["", " outside", " in the park", " at night"]


def sentence(subject, action, place, article="A"):
    return f"{article} {subject} is {action}{place}"


def overlap(a, b):
    x, y = set(a.lower().split()), set(b.lower().split())
    return len(x & y) / len(x | y)


def make_pair(rng):
    s = rng.randrange(len(SUBJECTS))
    a = rng.randrange(len(ACTIONS))
    place = rng.choice(PLACES)
    subj, hyper = SUBJECTS[s]
    act, para = ACTIONS[a]
    first = sentence(subj, act, place)
    kind = rng.choice(["entail", "entail", "contra", "neutral", "neutral"])
    if kind == "entail":
        variant = rng.randrange(3)
        if variant == 0:
            second = sentence(hyper, act, place)
        elif variant == 1:
            second = sentence(subj, para, place)
        else:
            second = sentence(subj, act, "")
        label, base = "ENTAILMENT", 4.0
    elif kind == "contra":
        if rng.random() < 0.5:
            second = f"There is no {subj} {act}{place}"
        else:
            second = f"A {subj} is not {act}{place}"
        label, base = "CONTRADICTION", 3.0
    else:
        if rng.random() < 0.5:
            other = ACTIONS[(a + 1 + rng.randrange(len(ACTIONS) - 1)) % len(ACTIONS)][0]
            second = sentence(subj, other, rng.choice(PLACES))
        else:
            other = SUBJECTS[(s + 1 + rng.randrange(len(SUBJECTS) - 1)) % len(SUBJECTS)][0]
            other_act = ACTIONS[(a + 1 + rng.randrange(len(ACTIONS) - 1)) % len(ACTIONS)][0]
            second = sentence(other, other_act, rng.choice(PLACES))
        label, base = "NEUTRAL", 1.0
    score = min(5.0, max(1.0, round(base + 2.0 * overlap(first, second) - 0.5 + 0.2 * rng.random(), 1)))
    return first, second, score, label


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=64)
    ap.add_argument("--seed", type=int, default=2016)
    ap.add_argument("--trial", type=int, default=0, help="pairs assigned to TRIAL")
    ap.add_argument("--test", type=int, default=0, help="pairs assigned to TEST")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    seen = set()
    rows = []
    while len(rows) < args.pairs:
        first, second, score, label = make_pair(rng)
        if (first, second) in seen:
            continue
        seen.add((first, second))
        rows.append((first, second, score, label))
    n_train = args.pairs - args.trial - args.test
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("pair_ID\tsentence_A\tsentence_B\trelatedness_score\tentailment_judgment\tSemEval_set\n")
        for i, (first, second, score, label) in enumerate(rows):
            split = "TRAIN" if i < n_train else ("TRIAL" if i < n_train + args.trial else "TEST")
            f.write(f"{i + 1}\t{first}\t{second}\t{score:.1f}\t{label}\t{split}\n")


if __name__ == "__main__":
    main()
