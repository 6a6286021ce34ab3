"""Builds the golden-run fixture: inputs for `atk trace` plus the expected
store, computed here without any of the Rust code.

    python3 generate.py        # rewrites the files next to this script

BM25 ranking, TSV escaping and trace assembly are re-implemented from the
format description so the golden files are an independent oracle.
"""

import json
import math
import re
import shutil
from pathlib import Path

HERE = Path(__file__).resolve().parent
K1, B = 1.2, 0.75
K_FINAL = 3
MAX_ITERATIONS = 5

CORPUS = [
    (1, "Paris", "Paris is the capital and largest city of France on the Seine river"),
    (2, "Berlin", "Berlin is the capital of Germany and its largest city by population"),
    (3, "Rome", "Rome is the capital city of Italy founded on seven hills"),
    (4, "Madrid", "Madrid is the capital of Spain located in the centre of the country"),
    (5, "Seine", "The Seine is a river in northern France that flows through Paris to the English Channel"),
    (6, "Danube", "The Danube is the second longest river in Europe flowing through ten countries"),
    (7, "Nile", "The Nile is a major river in Africa and was long considered the longest river in the world"),
    (8, "Amazon River", "The Amazon river in South America is the largest river by discharge volume"),
    (9, "Telephone", "Alexander Graham Bell is credited with patenting the first practical telephone in 1876"),
    (10, "Light bulb", "Thomas Edison developed a practical incandescent light bulb in 1879"),
    (11, "Penicillin", "Alexander Fleming discovered penicillin in 1928 at St Mary's Hospital in London"),
    (12, "Relativity", "Albert Einstein published the theory of special relativity in 1905"),
    (13, "Jupiter", "Jupiter is the largest planet in the solar system and a gas giant"),
    (14, "Mars", "Mars is the fourth planet from the Sun and is often called the red planet"),
    (15, "Mercury", "Mercury is the smallest planet in the solar system and the closest to the Sun"),
    (16, "Saturn", "Saturn is a gas giant famous for its prominent ring system"),
    (17, "Mount Everest", "Mount Everest is the highest mountain above sea level located in the Himalayas"),
    (18, "K2", "K2 is the second highest mountain on Earth on the China Pakistan border"),
    (19, "Pacific Ocean", "The Pacific Ocean is the largest and deepest ocean on Earth"),
    (20, "Atlantic Ocean", "The Atlantic Ocean is the second largest ocean separating the Americas from Europe and Africa"),
    (21, "Hamlet", "Hamlet is a tragedy written by William Shakespeare around 1600"),
    (22, "Don Quixote", "Don Quixote is a Spanish novel by Miguel de Cervantes published in two parts"),
    (23, "War and Peace", "War and Peace is a novel by Leo Tolstoy set during the Napoleonic wars"),
    (24, "Mona Lisa", "The Mona Lisa is a portrait painted by Leonardo da Vinci and kept in the Louvre in Paris"),
    (25, "Starry Night", "The Starry Night is an oil painting by Vincent van Gogh from 1889"),
    (26, "Photosynthesis", "Photosynthesis is the process plants use to convert light energy into chemical energy"),
    (27, "DNA", "The double helix structure of DNA was described by Watson and Crick in 1953"),
    (28, "Gold", "Gold is a chemical element with the symbol Au and atomic number 79"),
    (29, "Iron", "Iron is a chemical element with the symbol Fe and atomic number 26"),
    (30, "Olympic Games", "The modern Olympic Games were first held in Athens in 1896"),
]

PROMPT = (
    "Answer the question. Think inside <think></think>, search with "
    "<search>query</search>, refine retrieved documents inside <refine></refine>, "
    "and give the final answer inside <answer></answer>.\nQuestion: {question}\n"
)


def tokenize(text):
    return [t.lower() for t in re.split(r"[^0-9A-Za-z]+", text) if t]


class Bm25:
    def __init__(self, docs):
        self.docs = []
        for docid, title, body in docs:
            toks = tokenize(title) + tokenize(body)
            self.docs.append((docid, toks))
        self.n = len(self.docs)
        self.avgdl = sum(len(t) for _, t in self.docs) / self.n
        self.df = {}
        for _, toks in self.docs:
            for term in set(toks):
                self.df[term] = self.df.get(term, 0) + 1

    def idf(self, term):
        df = self.df.get(term, 0)
        return math.log(1.0 + (self.n - df + 0.5) / (df + 0.5))

    def search(self, query, k):
        scored = []
        for docid, toks in self.docs:
            score = 0.0
            for term in tokenize(query):
                tf = toks.count(term)
                if tf:
                    norm = K1 * (1.0 - B + B * len(toks) / self.avgdl)
                    score += self.idf(term) * tf * (K1 + 1.0) / (tf + norm)
            if score > 0.0:
                scored.append((docid, score))
        scored.sort(key=lambda d: (-d[1], d[0]))
        return [d for d, _ in scored[:k]]


def escape(field):
    return (
        field.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def rows(header, body):
    return "".join("\t".join(escape(str(f)) for f in r) + "\n" for r in [header] + body)


# Each run is (qid, question, steps, ending) where a step is
# (thoughts, query, refinement) and ending is ("answer", text, closing_thoughts),
# ("malformed", tail) or ("cap",).
def direct(i):
    topics = [
        ("what is the capital of France", "Paris"),
        ("who painted the Mona Lisa", "Leonardo da Vinci"),
        ("what is the largest planet", "Jupiter"),
        ("who wrote Hamlet", "William Shakespeare"),
        ("what is the chemical symbol for gold", "Au"),
    ]
    q, a = topics[i % len(topics)]
    thoughts = [] if i % 2 else [f"I already know this one ({i})."]
    return (f"d{i:02d}", q, [], ("answer", a, thoughts))


def searched(qid, question, queries, answer):
    steps = []
    for n, q in enumerate(queries):
        thoughts = [f"step {n}: look up {q}"]
        refine = f"notes on {q}" if n % 2 == 0 else None
        steps.append((thoughts, q, refine))
    return (qid, question, steps, ("answer", answer, ["I can answer now."]))


def runs():
    out = [direct(i) for i in range(20)]
    one = [
        ("what river flows through Paris", ["Seine river Paris"], "Seine"),
        ("who invented the telephone", ["telephone inventor"], "Alexander Graham Bell"),
        ("who discovered penicillin", ["penicillin discovery"], "Alexander Fleming"),
        ("what is the highest mountain", ["highest mountain"], "Mount Everest"),
        ("which planet is the red planet", ["red planet"], "Mars"),
        ("who wrote War and Peace", ["War and Peace author"], "Leo Tolstoy"),
        ("who painted Starry Night", ["Starry Night painter"], "Vincent van Gogh"),
        ("when were the first modern Olympic Games", ["first modern Olympic Games"], "1896"),
        ("what is the deepest ocean", ["deepest ocean"], "Pacific"),
        ("what is the atomic number of iron", ["iron atomic number"], "26"),
    ]
    two = [
        ("which river is longer, the Nile or the Amazon", ["Nile length", "Amazon river length"], "the Nile"),
        ("what is the capital of Spain", ["Spain", "capital of Spain Madrid"], "Madrid"),
        ("who developed the light bulb", ["light bulb", "Edison incandescent light bulb"], "Thomas Edison"),
        ("what is the smallest planet", ["smallest planet", "Mercury planet size"], "Mercury"),
        ("who described the structure of DNA", ["DNA structure", "double helix discovery"], "Watson and Crick"),
        ("what is photosynthesis", ["photosynthesis", "plants light energy"], "converting light to chemical energy"),
    ]
    three = [
        ("which capital is on the Seine", ["Seine", "Seine capital", "capital of France"], "Paris"),
        ("which gas giant has rings", ["gas giant", "gas giant rings", "Saturn ring system"], "Saturn"),
        ("who wrote Don Quixote", ["Don Quixote", "Spanish novel", "Miguel de Cervantes novel"], "Cervantes"),
        ("what is the second highest mountain", ["second highest", "second highest mountain", "K2 mountain"], "K2"),
    ]
    for n, (q, qs, a) in enumerate(one):
        out.append(searched(f"s1_{n:02d}", q, qs, a))
    for n, (q, qs, a) in enumerate(two):
        out.append(searched(f"s2_{n:02d}", q, qs, a))
    for n, (q, qs, a) in enumerate(three):
        out.append(searched(f"s3_{n:02d}", q, qs, a))

    out.append(searched("empty", "what is a zorblat", ["zorblat quuxify"], "unknown"))
    out.append(
        (
            "malformed",
            "who published special relativity",
            [(["first look"], "special relativity", None)],
            ("malformed", "<think>almost there</think><answer>Albert Ein"),
        )
    )
    out.append(
        (
            "cap",
            "what flows through ten countries",
            [([f"try {n}"], q, None) for n, q in enumerate(
                ["river ten countries", "Danube", "Danube countries", "Danube", "river Europe"]
            )],
            ("cap",),
        )
    )

    # reformulation patterns: repeats, duplicates, expansions and narrowing
    patterns = [
        ("what is the capital of Italy", ["capital of Italy", "capital of Italy", "Rome capital"], "Rome"),
        ("capital of Germany", ["capital of Germany", "Berlin", "capital of Germany"], "Berlin"),
        ("longest river in Europe", ["longest river", "longest river in Europe", "longest river"], "Danube"),
        ("which ocean separates Europe from the Americas", ["Atlantic Ocean", "Atlantic", "Atlantic Ocean Europe Americas"], "Atlantic"),
        ("who published relativity", ["Einstein relativity 1905", "Einstein relativity", "EINSTEIN   relativity"], "Einstein"),
        ("where is the Louvre", ["Louvre Paris", "Louvre", "Louvre"], "Paris"),
        ("gas giant planets", ["gas giant planet", "Jupiter", "gas giant planet"], "Jupiter and Saturn"),
    ]
    for n, (q, qs, a) in enumerate(patterns):
        out.append(searched(f"p{n}", q, qs, a))

    # special characters in descriptions survive escaping
    qid, q, steps, ending = out[20]
    steps[0][0].append("tab\there, newline\nthere, backslash \\ and café")
    assert len(out) == 50
    return out


def script_for(run):
    """Mock generator responses for one run."""
    _, _, steps, ending = run
    responses = []
    pending_refine = None
    for thoughts, query, refine in steps:
        text = ""
        if pending_refine:
            text += f"<refine>{pending_refine}</refine>"
        text += "".join(f"<think>{t}</think>" for t in thoughts)
        text += f"<search>{query}</search>"
        responses.append(text)
        pending_refine = refine
    head = f"<refine>{pending_refine}</refine>" if pending_refine else ""
    if ending[0] == "answer":
        _, answer, closing = ending
        body = "".join(f"<think>{t}</think>" for t in closing)
        # overrun after the stop must be discarded
        responses.append(f"{head}{body}<answer>{answer}</answer> trailing text")
    elif ending[0] == "malformed":
        responses.append(head + ending[1])
    return {"entries": [{"response": r} for r in responses]}


def expected_store(run, index):
    qid, question, steps, ending = run
    queries, thoughts, ranked, kinds = [], [], [], []
    for it, (ts, query, refine) in enumerate(steps):
        queries.append([qid, it, query])
        for t in ts:
            thoughts.append([qid, it, t.strip()])
            kinds.append("thought")
        # emitted at the start of the next call, attached to this frame
        if refine:
            thoughts.append([qid, it, refine])
            kinds.append("refinement")
        for rank, docid in enumerate(index.search(query, K_FINAL), start=1):
            ranked.append([qid, it, docid, rank])
    answers = []
    if ending[0] == "answer":
        for t in ending[2]:
            thoughts.append([qid, len(steps), t])
            kinds.append("thought")
        answers.append([qid, ending[1]])
        status = "answered"
    elif ending[0] == "malformed":
        thoughts.append([qid, len(steps), "almost there"])
        kinds.append("thought")
        status = "parse_error"
    else:
        status = "iteration_cap"
    files = {
        "answers.tsv": rows(["qid", "answer"], answers),
        "queries.tsv": rows(["qid", "iteration", "llm_query"], queries),
        "thoughts.tsv": rows(["qid", "iteration", "thought"], thoughts),
        "ranked_lists.tsv": rows(["qid", "iteration", "docid", "rank"], ranked),
    }
    return files, status, kinds


def main():
    index = Bm25(CORPUS)
    all_runs = runs()

    with open(HERE / "corpus.jsonl", "w") as f:
        for docid, title, body in CORPUS:
            f.write(json.dumps({"docid": docid, "title": title, "text": body}) + "\n")
    with open(HERE / "queries.tsv", "w") as f:
        f.write("qid\ttext\n")
        for qid, q, _, _ in all_runs:
            f.write(f"{qid}\t{q}\n")
    profile = {
        "name": "scripted-refine-agent",
        "prompt_template": PROMPT,
        "tags": {
            "think": "think",
            "search": "search",
            "information": "information",
            "answer": "answer",
            "refine": "refine",
        },
        "max_iterations": MAX_ITERATIONS,
        "max_tokens_per_call": 256,
        "timeout_secs": 60,
    }
    (HERE / "profile.json").write_text(json.dumps(profile, indent=2) + "\n")
    book = {run[0]: script_for(run) for run in all_runs}
    (HERE / "scripts.json").write_text(json.dumps(book, indent=2, ensure_ascii=False) + "\n")

    store = HERE / "store"
    if store.exists():
        shutil.rmtree(store)
    expected = []
    for run in all_runs:
        files, status, kinds = expected_store(run, index)
        d = store / run[0]
        d.mkdir(parents=True)
        for name, body in files.items():
            (d / name).write_text(body)
        expected.append((run[0], status, len(run[2]), ",".join(kinds)))
    with open(HERE / "expected.tsv", "w") as f:
        f.write("qid\tstatus\tlength\tdescription_kinds\n")
        for row in expected:
            f.write("\t".join(map(str, row)) + "\n")


if __name__ == "__main__":
    main()
