#!/usr/bin/env python3
"""Annotation backend adapter.

Usage: spacy_backend.py <input.json> <output.json>

Reads a JSON list of utterance strings and writes a JSON list of token
lists, one object {"t": surface, "pos": UPOS tag, "ner": entity type or ""}
per token. Requires the spacy package and the en_core_web_sm model.
"""
import json
import sys


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    import spacy

    nlp = spacy.load("en_core_web_sm")
    with open(sys.argv[1]) as f:
        texts = json.load(f)
    out = []
    for doc in nlp.pipe(texts):
        out.append([{"t": t.text, "pos": t.pos_, "ner": t.ent_type_} for t in doc])
    with open(sys.argv[2], "w") as f:
        json.dump(out, f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
