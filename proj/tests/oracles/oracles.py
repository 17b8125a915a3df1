#!/usr/bin/env python3
"""Independent reference values for the C++ tests.

Each function below recomputes a quantity from its definition with plain
Python, without sharing any code with the library. `frozen.json` holds the
values the C++ tests compare against; `--check` confirms they still agree.

    python3 oracles.py                 # print the values
    python3 oracles.py --check FILE    # compare against a frozen file
"""

import argparse
import json
import math
import re
import sys


def infonce(pos, negs, tau):
    num = math.exp(pos / tau)
    return -math.log(num / (num + sum(math.exp(n / tau) for n in negs)))


def layer_norm(x, gain, bias, eps=1e-5):
    mu = sum(x) / len(x)
    var = sum((v - mu) ** 2 for v in x) / len(x)
    return [g * (v - mu) / math.sqrt(var + eps) + b for v, g, b in zip(x, gain, bias)]


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


# ---- tokenizer hash -------------------------------------------------------


def fnv_piece(piece, seed):
    mask = (1 << 64) - 1
    h = 0xCBF29CE484222325 ^ seed
    for c in piece.encode():
        h ^= c
        h = (h * 0x100000001B3) & mask
    h ^= h >> 32
    h ^= h >> 16
    return h & 0xFFFF


SEED = 0x9E3779B97F4A7C15


def token_hashes():
    return {p: fnv_piece(p, SEED) for p in ["date", ".", "isoformat", "write", "x"]}


# ---- TF-IDF ----------------------------------------------------------------


def terms(text):
    out = []
    for word in re.findall(r"[A-Za-z0-9_]+", text):
        out += [p.lower() for p in word.split("_") if p]
    return out


def tfidf_model(docs):
    df = {}
    for d in docs:
        for t in set(d):
            df[t] = df.get(t, 0) + 1
    return len(docs), df


def tfidf_vec(model, ts):
    n, df = model
    counts = {}
    for t in ts:
        counts[t] = counts.get(t, 0) + 1
    return {t: c / len(ts) * (math.log(n / (1 + df[t])) + 1) for t, c in counts.items() if t in df}


def sparse_cos(a, b):
    d = sum(w * b.get(t, 0.0) for t, w in a.items())
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    return 0.0 if na == 0 or nb == 0 else d / (na * nb)


RELIANCE_F0_HEAD = "def sync_store(store, remote):\n    "
RELIANCE_SNIPPET = "keys = remote.list_keys(store)\n"
RELIANCE_F0_TAIL = "    for key in keys:\n        store.put(key, remote.fetch(key))\n    return store\n"
RELIANCE_F1 = "def fetch_page(client, url):\n    page = client.get(url)\n    return page.text\n"
RELIANCE_F2 = "def count_keys(table):\n    return len(table.keys())\n"
RELIANCE_COMMENT = "list remote, fetch each key, put"


def reliance():
    f0 = RELIANCE_F0_HEAD + RELIANCE_SNIPPET + RELIANCE_F0_TAIL
    model = tfidf_model([terms(f0), terms(RELIANCE_F1), terms(RELIANCE_F2)])
    c = tfidf_vec(model, terms(RELIANCE_COMMENT))
    snippet = sparse_cos(c, tfidf_vec(model, terms(RELIANCE_SNIPPET)))
    rest = sparse_cos(c, tfidf_vec(model, terms(RELIANCE_F0_HEAD + RELIANCE_F0_TAIL)))
    n, df = model
    return {
        "snippet_cosine": snippet,
        "rest_cosine": rest,
        "idf_store": math.log(n / (1 + df["store"])) + 1,
        "idf_keys": math.log(n / (1 + df["keys"])) + 1,
    }


# ---- batch loss ------------------------------------------------------------

# Two block examples. A has a 2-candidate chain and one in-function negative;
# B has one candidate. Embeddings are arbitrary but fixed.
BATCH = {
    "tau": 0.1,
    "alpha": 1.0,
    "examples": [
        {
            "query": [0.3, -0.2, 0.5],
            "candidates": [[0.6, -0.1, 0.3], [0.1, 0.4, 0.2]],
            "ids": ["A/B1", "A/B0"],
            "in_function": [[-0.2, 0.5, 0.1]],
        },
        {
            "query": [-0.4, 0.1, 0.2],
            "candidates": [[-0.3, 0.2, 0.4]],
            "ids": ["B/B0"],
            "in_function": [],
        },
    ],
}


def batch_loss(batch, maxsim=True):
    exs = batch["examples"]
    positives = []
    for ex in exs:
        scores = [dot(ex["query"], c) for c in ex["candidates"]]
        if maxsim:
            best = max(range(len(scores)), key=lambda i: (scores[i], -i))
        else:
            best = len(scores) - 1
        positives.append(best)
    losses = []
    for i, ex in enumerate(exs):
        pos = dot(ex["query"], ex["candidates"][positives[i]])
        negs = []
        for j, other in enumerate(exs):
            if j != i:
                negs.append(dot(ex["query"], other["candidates"][positives[j]]))
        negs += [dot(ex["query"], n) for n in ex["in_function"]]
        losses.append(infonce(pos, negs, batch["tau"]))
    L_b = sum(losses) / len(losses)
    return {"positives": positives, "L_b": L_b, "total": batch["alpha"] * L_b}


# ---- ranking ---------------------------------------------------------------

# Three same-granularity entries and three queries; the last query ties all three.
RANKING = {
    "entries": {"e0": [1.0, 0.0], "e1": [0.0, 1.0], "e2": [0.5, 0.5]},
    "queries": [
        {"q": [0.2, 0.9], "gold": "e1"},
        {"q": [1.0, 0.0], "gold": "e2"},
        {"q": [1.0, 1.0], "gold": "e2"},
    ],
}


def ranking():
    ranks = []
    for item in RANKING["queries"]:
        order = sorted(RANKING["entries"].items(), key=lambda kv: (-dot(item["q"], kv[1]), kv[0]))
        ranks.append([k for k, _ in order].index(item["gold"]) + 1)
    return {"ranks": ranks, "mrr": sum(1.0 / r for r in ranks) / len(ranks)}


def random_mrr(n):
    return sum(1.0 / r for r in range(1, n + 1)) / n


def compute():
    return {
        "infonce_pos1_negs00_tau1": infonce(1.0, [0.0, 0.0], 1.0),
        "infonce_symmetric": infonce(0.37, [0.37], 0.05),
        "layer_norm_3_1": layer_norm([3.0, 1.0], [1.0, 1.0], [0.0, 0.0]),
        "token_hashes": token_hashes(),
        "reliance": reliance(),
        "block_batch_input": BATCH,
        "block_batch": batch_loss(BATCH),
        "block_batch_no_maxsim": batch_loss(BATCH, maxsim=False),
        "ranking_input": RANKING,
        "ranking": ranking(),
        "random_mrr_100": random_mrr(100),
    }


def close(a, b, tol=1e-12):
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(close(a[k], b[k], tol) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= tol * max(1.0, abs(a))
    return a == b


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", metavar="FILE")
    args = ap.parse_args()
    values = compute()
    if args.check:
        with open(args.check) as f:
            frozen = json.load(f)
        if not close(values, frozen):
            print("oracle values drifted from", args.check, file=sys.stderr)
            print(json.dumps(values, indent=2))
            return 1
        print("oracles match", args.check)
        return 0
    print(json.dumps(values, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
