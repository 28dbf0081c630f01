#!/usr/bin/env python3
"""Generate the synthetic desk corpus.

Writes train.txt, five topical articles, desk.grammar (rules plus a tag
lexicon estimated from the training text) and desk.cfg into the output
directory. Output is a pure function of --seed.
"""

import argparse
import collections
import pathlib
import random

DETS = ["the", "a", "this", "that", "each", "some", "our", "his", "her", "one", "every", "my"]
PREPS = ["in", "on", "at", "for", "with", "from", "to", "near", "under", "by", "into", "over"]
ADJS = [
    "new", "old", "red", "hot", "cold", "long", "short", "full", "small", "large", "big",
    "clean", "green", "brown", "white", "dark", "warm", "wet", "dry", "fresh", "fine", "tall",
    "tidy", "heavy", "light", "round", "neat", "fat", "thin", "low", "high", "soft", "hard",
    "sharp", "flat", "pale", "tame", "wild", "late", "early",
]

TOPICS = {
    "office": {
        "nouns": ["form", "file", "folder", "desk", "letter", "memo", "report", "paper", "pen",
                  "clerk", "manager", "office", "meeting", "note", "fee", "copy", "stamp",
                  "table", "lamp", "chair", "phone", "card", "list", "bill", "order", "record",
                  "box", "team", "client", "contract", "invoice", "budget", "plan", "date",
                  "name", "line", "mail", "post", "sheet", "ink"],
        "verbs": ["fill", "sign", "file", "send", "read", "write", "copy", "check", "sort",
                  "post", "mail", "type", "print", "count", "hold", "need", "keep", "find",
                  "open", "close", "tell", "order", "list", "date"],
    },
    "farm": {
        "nouns": ["farm", "barn", "cow", "corn", "hen", "horse", "field", "fence", "tractor",
                  "farmer", "seed", "crop", "hay", "goat", "pig", "mill", "well", "hill", "hut",
                  "cart", "feed", "fold", "cattle", "wheat", "calf", "colt", "bull", "ram",
                  "lamb", "sheep", "pen", "gate", "trough", "plough", "land", "soil", "rain",
                  "sack", "yard", "herd"],
        "verbs": ["till", "feed", "fold", "plant", "sow", "reap", "milk", "herd", "mend",
                  "dig", "fence", "drive", "pull", "load", "carry", "sell", "fill", "water",
                  "count", "hold", "keep", "need", "find", "move"],
    },
    "kitchen": {
        "nouns": ["pan", "pot", "cook", "meat", "heat", "salt", "tea", "cake", "bread", "cup",
                  "knife", "fork", "plate", "soup", "rice", "bean", "oven", "sink", "milk",
                  "egg", "oil", "jar", "lid", "tin", "mug", "bowl", "dish", "spoon", "sauce",
                  "flour", "butter", "sugar", "lemon", "onion", "stove", "towel", "kettle",
                  "meal", "fish", "ham"],
        "verbs": ["cook", "heat", "boil", "mix", "pour", "stir", "bake", "cut", "chop", "wash",
                  "dry", "fill", "taste", "serve", "melt", "slice", "peel", "fry", "hold",
                  "need", "keep", "find", "open", "close"],
    },
    "workshop": {
        "nouns": ["tool", "bolt", "nut", "hammer", "saw", "nail", "drill", "file", "wire",
                  "metal", "board", "bench", "belt", "fan", "motor", "gear", "lathe", "pipe",
                  "tin", "mould", "screw", "clamp", "vice", "plank", "panel", "frame", "hinge",
                  "lever", "pump", "valve", "wheel", "spring", "bar", "rod", "sheet", "joint",
                  "glue", "paint", "brush", "shelf"],
        "verbs": ["fix", "fit", "cut", "drill", "file", "bend", "weld", "paint", "mend", "turn",
                  "bolt", "nail", "saw", "sand", "clamp", "test", "build", "hold", "need",
                  "keep", "find", "move", "check", "carry"],
    },
    "garden": {
        "nouns": ["tree", "leaf", "rose", "seed", "pond", "path", "soil", "hose", "rake", "hoe",
                  "bed", "weed", "moss", "root", "fern", "bush", "bee", "bird", "nest", "lawn",
                  "gate", "wall", "pot", "flower", "shed", "bulb", "hedge", "vine", "fruit",
                  "apple", "pear", "plum", "stone", "sun", "shade", "grass", "branch", "bloom",
                  "worm", "hill"],
        "verbs": ["plant", "water", "dig", "mow", "rake", "weed", "prune", "pick", "trim",
                  "grow", "sow", "tend", "feed", "cut", "fill", "move", "hold", "need", "keep",
                  "find", "watch", "clear", "lift", "tie"],
    },
}

ARTICLE_ORDER = ["office", "farm", "kitchen", "workshop", "garden"]


def zipf_weights(n, s=0.8):
    return [1.0 / (r + 1) ** s for r in range(n)]


class Generator:
    def __init__(self, seed):
        prefs = random.Random(seed * 7919 + 1)
        self.obj = {}
        self.adj = {}
        self.prep = {}
        for name, topic in TOPICS.items():
            for v in topic["verbs"]:
                self.obj[(name, v)] = prefs.sample(topic["nouns"], 4)
                self.prep[(name, v)] = prefs.sample(PREPS, 2)
            for n in topic["nouns"]:
                self.adj[(name, n)] = prefs.sample(ADJS, 3)

    def pick(self, rng, items):
        return rng.choices(items, weights=zipf_weights(len(items)))[0]

    def noun_phrase(self, rng, topic, noun, depth):
        out = []
        r = rng.random()
        if r < 0.2:
            out.append(("N", noun))
            return out
        out.append(("Det", self.pick(rng, DETS)))
        n_adj = rng.choices([0, 1, 2], weights=[0.65, 0.3, 0.05])[0]
        for _ in range(n_adj):
            pool = self.adj[(topic, noun)] if rng.random() < 0.7 else ADJS
            out.append(("Adj", rng.choice(pool)))
        out.append(("N", noun))
        if r > 0.9 and depth < 2:
            out += self.prep_phrase(rng, topic, None, depth + 1)
        return out

    def prep_phrase(self, rng, topic, verb, depth):
        if verb is not None and rng.random() < 0.7:
            p = rng.choice(self.prep[(topic, verb)])
        else:
            p = self.pick(rng, PREPS)
        noun = self.pick(rng, TOPICS[topic]["nouns"])
        return [("P", p)] + self.noun_phrase(rng, topic, noun, depth + 1)

    def verb_phrase(self, rng, topic, depth=0):
        verb = self.pick(rng, TOPICS[topic]["verbs"])
        r = rng.random()
        if r < 0.8:
            if rng.random() < 0.75:
                noun = rng.choice(self.obj[(topic, verb)])
            else:
                noun = self.pick(rng, TOPICS[topic]["nouns"])
            out = [("V", verb)] + self.noun_phrase(rng, topic, noun, depth)
            if r < 0.25 and depth < 2:
                out += self.prep_phrase(rng, topic, verb, depth + 1)
            return out
        return [("V", verb)] + self.prep_phrase(rng, topic, verb, depth + 1)

    def sentence(self, rng, topic):
        if rng.random() < 0.85:
            noun = self.pick(rng, TOPICS[topic]["nouns"])
            words = self.noun_phrase(rng, topic, noun, 1) + self.verb_phrase(rng, topic)
        else:
            words = self.verb_phrase(rng, topic)
        words.append(("Punc", "!" if rng.random() < 0.05 else "."))
        tag, first = words[0]
        words[0] = (tag, first[0].upper() + first[1:])
        return words


def render(sentences):
    lines = []
    for s in sentences:
        text = " ".join(w for _, w in s[:-1]) + s[-1][1]
        lines.append(text)
    return "\n".join(lines) + "\n"


GRAMMAR_RULES = """\
start S
S -> NP VPP 0.85
S -> VP Punc 0.15
VPP -> VP Punc 1.0
VP -> V NP 0.6
VP -> VP PP 0.25
VP -> V PP 0.15
NP -> Det NB 0.7
NP -> NP PP 0.1
NP -> N 0.2
NB -> Adj NB 0.3
NB -> N 0.7
PP -> P NP 1.0
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/desk")
    ap.add_argument("--seed", type=int, default=1996)
    ap.add_argument("--train-tokens", type=int, default=150000)
    ap.add_argument("--article-words", type=int, default=2000)
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gen = Generator(args.seed)

    rng = random.Random(args.seed)
    train, tokens = [], 0
    topics = list(TOPICS)
    while tokens < args.train_tokens:
        topic = rng.choice(topics)
        for _ in range(rng.randint(5, 15)):
            s = gen.sentence(rng, topic)
            train.append(s)
            tokens += len(s)
    (out / "train.txt").write_text(render(train))

    for i, topic in enumerate(ARTICLE_ORDER, start=1):
        arng = random.Random(args.seed * 1000 + i)
        sents, words = [], 0
        while words < args.article_words:
            s = gen.sentence(arng, topic)
            sents.append(s)
            words += len(s) - 1
        (out / f"a{i:02d}_{topic}.txt").write_text(render(sents))

    counts = collections.defaultdict(collections.Counter)
    for s in train:
        for tag, w in s:
            counts[w][tag] += 1
    lines = [GRAMMAR_RULES, "# word TAB tag:prob,... estimated from train.txt\n"]
    for w in sorted(counts):
        c = counts[w]
        total = sum(c.values())
        dist = ",".join(f"{t}:{n / total:.6f}" for t, n in sorted(c.items()))
        lines.append(f"{w}\t{dist}\n")
    (out / "desk.grammar").write_text("".join(lines))

    articles = "\n".join(f"{topic} = a{i:02d}_{topic}.txt"
                         for i, topic in enumerate(ARTICLE_ORDER, start=1))
    (out / "desk.cfg").write_text(f"""\
# Desk experiment: five synthetic topical articles against a mixed-topic
# training text. Paths are relative to this file.

[data]
train = train.txt
grammar = desk.grammar

[articles]
{articles}

[lexicon]
size = 5000
seed = 7

[channel]
target = 0.57
tolerance = 0.03
calibration_sentences = 400
k = 10

[collocation]
max_distance = 2

[relax]
alpha = 0.7
window = 2
epsilon = 1e-4
max_iters = 50
prune_floor = 0.02
keep_min = 3

[constraints]
boost = 1.5
follow_gap = 0.2
min_length = 2

[imaging]
noise = 0.0
type1 = 1.0

[run]
seed = 1
stages = baseline, relax, constraints
""")


if __name__ == "__main__":
    main()
