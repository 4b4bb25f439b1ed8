"""Builds fixtures/toy_adult/candidates.jsonl, the 82-candidate replay fixture.

Stage outcomes are fixed by construction: 5 candidates keep the query's class,
18 valid ones touch immutable features (9 race only, 1 country only, 8 both),
and of the remaining 59 exactly 13 are non-dominated. Criteria are stored
per candidate because the replay runs without the original data and model.
"""
import json
import math
import random
import sys

QUERY = {
    "age": 24.0, "education.num": 10.0, "capital.gain": 0.0, "capital.loss": 0.0,
    "hours.per.week": 30.0, "workclass": "Self-emp-not-inc",
    "marital.status": "Never-married", "occupation": "Prof-specialty",
    "race": "Asian-Pac-Islander", "sex": "Male", "native.country": "United-States",
}
QUERY_CLASS = ">50K"
DESIRED = "<=50K"

WORKCLASS = ["Private", "Self-emp-inc", "Local-gov", "State-gov", "Federal-gov"]
MARITAL = ["Married-civ-spouse", "Divorced", "Separated", "Widowed"]
OCCUPATION = ["Exec-managerial", "Tech-support", "Sales", "Craft-repair", "Adm-clerical"]
RACES = ["White", "Black", "Other", "Amer-Indian-Eskimo"]
COUNTRIES = ["France", "Philippines", "China", "Canada", "India", "Germany"]

# (explainer, count) in provenance order; 82 in total.
EXPLAINERS = [("nun", 10), ("growing_spheres", 20), ("wachter_lite", 18),
              ("cadex_lite", 14), ("diverse_restarts", 20)]

CHOSEN = (0.173, 0.962, 0.11)
# Remaining front members: extreme trade-offs that keep the chosen one closest
# to the ideal point (0.04, 0.11, 1) under min-max normalised Euclidean distance.
FRONT = [
    (0.04, 3.5, 0.0),
    (3.2, 0.11, 0.2),
    (3.0, 3.2, 1.0),
    (0.3, 2.8, 0.3),
    (0.05, 3.9, 0.12),
    (0.12, 3.4, 0.1),
    (3.6, 0.3, 0.6),
    (2.6, 3.0, 0.8),
    (3.9, 0.2, 0.4),
    (0.09, 3.7, 0.05),
    (2.9, 0.6, 0.2),
    (3.3, 2.5, 0.6),
]


def dominates(a, b):
    # (min, min, max)
    ge = a[0] <= b[0] and a[1] <= b[1] and a[2] >= b[2]
    gt = a[0] < b[0] or a[1] < b[1] or a[2] > b[2]
    return ge and gt


def mutate(rng, q, n_changes):
    c = dict(q)
    keys = ["age", "education.num", "capital.gain", "capital.loss", "hours.per.week",
            "workclass", "marital.status", "occupation"]
    for k in rng.sample(keys, n_changes):
        if k == "age":
            c[k] = float(rng.randint(25, 60))
        elif k == "education.num":
            c[k] = float(rng.randint(11, 16))
        elif k == "capital.gain":
            c[k] = float(rng.choice([3103, 5178, 7688, 10520, 15024]))
        elif k == "capital.loss":
            c[k] = float(rng.choice([1485, 1902, 2415]))
        elif k == "hours.per.week":
            c[k] = float(rng.randint(35, 60))
        elif k == "workclass":
            c[k] = rng.choice(WORKCLASS)
        elif k == "marital.status":
            c[k] = rng.choice(MARITAL)
        else:
            c[k] = rng.choice(OCCUPATION)
    return c


def main(out_path):
    rng = random.Random(7)
    front = [CHOSEN] + FRONT
    for i, a in enumerate(front):
        for j, b in enumerate(front):
            assert i == j or not dominates(a, b), (a, b)

    dominated = []
    while len(dominated) < 46:
        base = front[rng.randrange(len(front))]
        cand = (round(min(4.0, base[0] + rng.uniform(0.05, 1.2)), 3),
                round(min(4.0, base[1] + rng.uniform(0.05, 1.2)), 3),
                round(max(0.0, base[2] - rng.choice([0.0, 0.2, 0.4])), 2))
        if any(dominates(f, cand) for f in front):
            dominated.append(cand)
    dominated[0] = (4.0, 4.0, 0.0)

    kept = front + dominated
    lo = [min(v[i] for v in kept) for i in range(3)]
    hi = [max(v[i] for v in kept) for i in range(3)]

    def dist(v):
        n = [(v[0] - lo[0]) / (hi[0] - lo[0]), (v[1] - lo[1]) / (hi[1] - lo[1]),
             1 - (v[2] - lo[2]) / (hi[2] - lo[2])]
        return math.sqrt(sum(x * x for x in n))

    best = min(front, key=dist)
    assert best == CHOSEN, (best, dist(best), dist(CHOSEN))

    records = []
    # kind: 'chosen' | 'front' | 'dominated' | 'invalid' | 'race' | 'country' | 'both'
    kinds = (["chosen"] + ["front"] * 12 + ["dominated"] * 46 + ["invalid"] * 5
             + ["race"] * 9 + ["country"] * 1 + ["both"] * 8)
    crit_front = iter(FRONT)
    crit_dom = iter(dominated)
    pool = []
    for kind in kinds:
        if kind == "chosen":
            values = dict(QUERY)
            values["capital.gain"] = 17327.0
            crit = CHOSEN
        else:
            values = mutate(rng, QUERY, rng.randint(1, 4))
            if kind == "front":
                crit = next(crit_front)
            elif kind == "dominated":
                crit = next(crit_dom)
            else:
                crit = (round(rng.uniform(0.1, 3.5), 3), round(rng.uniform(0.1, 3.5), 3),
                        round(rng.choice([0.2, 0.4, 0.6, 0.8, 1.0]), 2))
            if kind in ("race", "both"):
                values["race"] = rng.choice(RACES)
            if kind in ("country", "both"):
                values["native.country"] = rng.choice(COUNTRIES)
        predicted = QUERY_CLASS if kind == "invalid" else DESIRED
        pool.append((kind, values, predicted, crit))

    # cadex_lite restart 0 holds the chosen candidate; the rest are shuffled over slots.
    chosen = pool[0]
    rest = pool[1:]
    rng.shuffle(rest)
    slots = []
    for name, count in EXPLAINERS:
        for r in range(count):
            slots.append((name, r))
    cadex0 = slots.index(("cadex_lite", 0))
    ordered = rest[:cadex0] + [chosen] + rest[cadex0:]
    assert len(ordered) == 82

    with open(out_path, "w") as fh:
        fh.write(json.dumps({"query": QUERY, "predicted": QUERY_CLASS}) + "\n")
        for (name, r), (kind, values, predicted, crit) in zip(slots, ordered):
            rec = {
                "explainer": name,
                "restart": r,
                "values": values,
                "predicted": predicted,
                "criteria": {"proximity": crit[0], "feasibility": crit[1], "dpow": crit[2]},
            }
            fh.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures/toy_adult/candidates.jsonl")
