"""Smoke test for the Python bindings.

Build and install the extension first (see README), then run:

    python python/smoke_test.py
"""

import re
import sys

import attest

CLAIMS = [
    "Coffee lowers the risk of type 2 diabetes.",
    "Caffeine can cause insomnia at high doses.",
]


def listed(prompt):
    """(display index, text) pairs of the last document block in a prompt."""
    block = prompt.rsplit("Document:\n", 1)[-1]
    out = []
    for line in block.splitlines():
        m = re.match(r"\[(\d+)\] \(Title: [^)]*\) (.*)", line)
        if not m:
            break
        out.append((int(m.group(1)), m.group(2)))
    return out


def model(prompt):
    """Answers with CLAIMS in order and cites the document that states each,
    or the first listed document when none does."""
    if prompt.rstrip().endswith("Sentence with citation:"):
        sentence = prompt.rsplit("Sentence: ", 1)[-1].split("\n", 1)[0]
        idx = next((i for i, text in listed(prompt) if sentence.rstrip(".") in text), 1)
        return f"{sentence}[{idx}]"
    if prompt.rstrip().endswith("Generated questions:"):
        return "caffeine insomnia"
    answer = prompt.rsplit("Answer:", 1)[-1]
    done = sum(c in answer for c in CLAIMS)
    return CLAIMS[done] if done < len(CLAIMS) else "<EOS>"


def check(cond, what):
    print(("ok    " if cond else "FAIL  ") + what)
    if not cond:
        sys.exit(1)


def main():
    docs = [
        attest.Document("c1", "Coffee lowers the risk of type 2 diabetes.", title="Coffee"),
        attest.Document("c2", "Caffeine can cause insomnia at high doses.", title="Caffeine"),
        attest.Document("c3", "Tea contains less caffeine than coffee.", title="Tea"),
    ]
    index = attest.Index(docs)
    check(len(index) == 3 and len(index.fingerprint) == 64, "index builds")
    hits = index.retrieve("coffee diabetes", 2)
    check(hits[0][0].id == "c1" and hits[0][1] >= hits[1][1], "retrieval ranks by score")
    check(index.get("c2") == docs[1] and index.get("nope") is None, "lookup by id")

    resp = attest.run("What does coffee do to health?", index, model, max_trials=2, trace=True)
    units = [(u["claim"], u["citations"]) for u in resp["units"]]
    check([c for c, _ in units] == CLAIMS, "engine emits both claims")
    check(all(u["verified"] for u in resp["units"]), "every claim verified")
    check(resp["token_usage"]["judge_calls"] > 0 and "events" in resp["trace"], "usage and trace reported")

    recall, precision = attest.citation_scores(units, index)
    check((recall, precision) == (1.0, 1.0), f"citation recall {recall:.2f}, precision {precision:.2f}")
    check(attest.citation_scores([(CLAIMS[0], ["c1", "c3"])], index) == (1.0, 0.5), "irrelevant citation penalised")
    check(abs(attest.citation_f1(0.5, 1.0) - 2 / 3) < 1e-12, "citation F1")

    text, refs = attest.renumber(units, index)
    check(text.startswith("Coffee lowers the risk of type 2 diabetes[1].") and refs[0][1] == "c1", "renumbering")

    kept = attest.simplify(CLAIMS[0], [docs[2], docs[0], docs[1]])
    check([d.id for d in kept] == ["c1"], "simplifier keeps the supporting document")

    check(attest.exact_match("The Coffee!", ["coffee"]) == 1.0, "exact match")
    check(attest.normalize_answer("An Apple, the pie") == "apple pie", "normalization")
    check(abs(attest.token_f1("coffee tea", ["coffee"]) - 2 / 3) < 1e-12, "token F1")
    check(attest.rouge_l("b c d", ["b d"]) == 0.8, "ROUGE-L")
    check(attest.ContainmentJudge().judge("coffee beans", "coffee")[0], "containment judge")

    base = attest.baseline("vanilla", "coffee?", index, ["Coffee lowers the risk of type 2 diabetes [1]."])
    check(base["units"][0]["citations"] == ["c1"] and not base["units"][0]["verified"], "vanilla baseline")

    def broken(_prompt):
        raise KeyError("model offline")

    try:
        attest.run("coffee?", index, broken)
        check(False, "callback errors propagate")
    except KeyError:
        check(True, "callback errors propagate")
    try:
        attest.citation_scores([("x", ["missing"])], index)
        check(False, "dangling citation rejected")
    except attest.AttestError:
        check(True, "dangling citation rejected")
    print("smoke test passed")


if __name__ == "__main__":
    main()
