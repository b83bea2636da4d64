#!/usr/bin/env python3
"""Regenerates data/mini: 20 queries, 200 passages, a 10-deep run, qrels,
gold answers and a predictions file. Output is deterministic."""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "mini"

PLACES = [
    "Veloria", "Quendar", "Ostravel", "Miraneth", "Kelvaro", "Tassin", "Durmont", "Ellisar",
    "Brannock", "Sylphen", "Corvath", "Isendal", "Norwick", "Halvane", "Peridel", "Zanthor",
    "Lowmere", "Ardentis", "Fenwyrd", "Galdora",
]
CITIES = [
    "Marenthal", "Oskaport", "Lirren", "Devaholm", "Teskar", "Umbrin", "Sallowfield", "Kariva",
    "Brestow", "Nimbrel", "Atherly", "Juvan", "Pellis", "Roskamor", "Wendlow", "Castavel",
    "Hollin", "Erdmark", "Ylva", "Torrance Vale",
]
RIVERS = ["Ambre", "Selk", "Orrin", "Vash", "Tullow", "Kenn", "Marrow", "Isca", "Dray", "Lune"]
FILLER = [
    "is known for its terraced vineyards and stone bridges",
    "hosts a winter festival that draws visitors from the coast",
    "has a long tradition of glassmaking and textile trade",
    "was mapped by surveyors in the early modern period",
    "maintains a network of canals used for freight",
    "exports timber, wool and salted fish",
    "has a temperate climate with wet springs",
    "keeps a public archive of regional folk songs",
]


def main() -> None:
    rng = random.Random(20240611)
    OUT.mkdir(parents=True, exist_ok=True)
    passages, queries, run, qrels, answers, preds = [], [], [], [], [], []
    doc_no = 0

    for qi, (place, city) in enumerate(zip(PLACES, CITIES)):
        qid = f"q{qi + 1:02d}"
        queries.append({"query_id": qid, "text": f"What is the capital of {place}?"})
        answers.append({"query_id": qid, "answers": [city, f"{city} City"]})

        n_pos = 1 + qi % 4
        grades = [3] + [rng.choice([1, 2]) for _ in range(n_pos - 1)] + [0] * (10 - n_pos)
        docs = []
        for g in grades:
            doc_no += 1
            did = f"d{doc_no:03d}"
            river = rng.choice(RIVERS)
            if g == 3:
                text = (f"{city} is the capital of {place}. The city lies on the {river} "
                        f"river and {rng.choice(FILLER)}.")
            elif g == 2:
                text = (f"The government of {place} sits in {city}, where the parliament "
                        f"meets each spring.")
            elif g == 1:
                text = (f"Travellers to {place} usually arrive through {city}, the seat of "
                        f"the national courts.")
            else:
                text = f"{place} {rng.choice(FILLER)}. Its largest river is the {river}."
            passages.append({"doc_id": did, "title": place, "text": text})
            docs.append((did, g))
            qrels.append(f"{qid} 0 {did} {g}")

        # First-stage order: a noisy score that only loosely tracks grade.
        scored = [(g * 0.6 + rng.random() * 2.5, did) for did, g in docs]
        scored.sort(key=lambda t: (-t[0], t[1]))
        for rank, (score, did) in enumerate(scored, start=1):
            run.append(f"{qid} Q0 {did} {rank} {round(score, 4)} mini")

        pick = qi % 3
        if pick == 0:
            preds.append({"query_id": qid, "answer": city})
        elif pick == 1:
            preds.append({"query_id": qid, "answer": f"The capital is {city}."})
        else:
            preds.append({"query_id": qid, "answer": rng.choice(CITIES)})

    def dump_jsonl(name, rows):
        with open(OUT / name, "w", encoding="utf-8") as f:
            for r in rows:
                f.write(json.dumps(r, ensure_ascii=False) + "\n")

    dump_jsonl("corpus.jsonl", passages)
    dump_jsonl("queries.jsonl", queries)
    dump_jsonl("answers.jsonl", answers)
    dump_jsonl("predictions.jsonl", preds)
    (OUT / "run.trec").write_text("\n".join(run) + "\n", encoding="utf-8")
    (OUT / "qrels.txt").write_text("\n".join(qrels) + "\n", encoding="utf-8")
    (OUT / "profile.json").write_text(json.dumps(
        {"counts": {"0": 0.35, "1": 0.25, "2": 0.2, "3": 0.1, "4": 0.05, "6": 0.05}}, indent=2) + "\n")


if __name__ == "__main__":
    main()
