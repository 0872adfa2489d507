#!/usr/bin/env python3
"""Writes the synthetic evaluation corpus (data/corpus.txt).

The corpus is produced by a seeded probabilistic grammar over a hand-written
English lexicon, so it carries no third-party copyright and is released under
CC0 along with the rest of data/. One document per line.

    python3 tools/make_corpus.py --out data/corpus.txt --bytes 1300000
"""

import argparse
import random

TOPICS = {
    "sea": {
        "nouns": "ship sailor harbor wave storm captain deck island coast tide anchor sail mast crew "
                 "lighthouse fisherman net boat shore reef gull compass voyage cargo rope cabin current "
                 "horizon wreck dock pier bay cliff sand whale dolphin oar lantern map chart keel".split(),
        "verbs": "sailed drifted anchored rowed steered sank floated docked crossed navigated charted "
                 "hauled signaled landed".split(),
        "adjs": "salty stormy calm grey deep wild distant narrow rocky misty cold".split(),
    },
    "farm": {
        "nouns": "farmer field barn horse cow wheat harvest plow orchard apple fence tractor goat "
                 "sheep hen egg meadow pasture seed soil rain well mill bread cart hay stable pig "
                 "garden basket grain corn river bridge village market lamb wagon".split(),
        "verbs": "planted harvested plowed watered fed gathered milked sowed carried sold baked "
                 "mended tended grazed".split(),
        "adjs": "green golden dusty ripe fresh muddy quiet broad fertile sunny dry".split(),
    },
    "city": {
        "nouns": "street tower merchant clerk office train station bank market square crowd lamp "
                 "window carriage newspaper shop factory worker council mayor theater library "
                 "bridge tram avenue hotel cafe letter ledger clock gate park fountain alley roof".split(),
        "verbs": "walked hurried traded argued wrote counted waited opened closed built painted "
                 "printed delivered announced".split(),
        "adjs": "busy crowded noisy bright tall old narrow wet modern elegant dim".split(),
    },
    "forest": {
        "nouns": "tree wolf fox deer owl path hunter trail stream moss oak pine branch leaf bear "
                 "cabin fire smoke hill valley stone root mushroom berry nest bird ranger camp "
                 "clearing thicket log axe bow arrow shadow frost snow".split(),
        "verbs": "wandered hunted climbed followed tracked howled rustled hid chopped burned "
                 "crossed gathered watched listened".split(),
        "adjs": "dark ancient thick silent green frozen hidden tall wild gentle deep".split(),
    },
    "science": {
        "nouns": "scientist experiment theory engine laboratory telescope star planet comet "
                 "machine gear measurement result paper student professor lecture lens mirror "
                 "formula number instrument model signal wire battery magnet crystal sample "
                 "notebook chart graph question answer method problem".split(),
        "verbs": "measured observed tested calculated designed proved published studied explained "
                 "discovered recorded compared repeated examined".split(),
        "adjs": "careful precise strange new clever small heavy electric bright complex simple".split(),
    },
    "home": {
        "nouns": "mother father child sister brother grandmother kitchen table chair door window "
                 "bed blanket fire candle dinner soup cup plate letter dog cat story song book "
                 "friend neighbor visitor evening morning holiday gift house garden".split(),
        "verbs": "cooked cleaned read sang laughed slept visited welcomed remembered told "
                 "shared played washed prepared".split(),
        "adjs": "warm small happy tired gentle kind young old sleepy cheerful quiet".split(),
    },
}

COMMON_NOUNS = "man woman day night year time way world hand eye voice heart road town house " \
               "door light morning evening friend story word name thing place moment".split()
NAMES = "anna thomas mary john elena peter clara henry lucy samuel rosa david emma george " \
        "nora william alice james ruth oliver".split()
DETS = [("the", 40), ("a", 18), ("this", 4), ("that", 4), ("every", 2), ("one", 2),
        ("his", 6), ("her", 6), ("their", 4), ("our", 2), ("no", 1), ("some", 3)]
PRONOUNS = [("he", 8), ("she", 8), ("they", 6), ("we", 3), ("i", 4), ("it", 5)]
PREPS = [("in", 10), ("on", 6), ("near", 3), ("under", 2), ("behind", 2), ("across", 2),
         ("through", 3), ("beside", 2), ("toward", 2), ("with", 6), ("from", 4), ("into", 3),
         ("at", 5), ("over", 2), ("along", 2)]
ADVS = [("slowly", 3), ("quickly", 3), ("quietly", 3), ("again", 3), ("often", 2), ("never", 2),
        ("always", 2), ("suddenly", 2), ("carefully", 2), ("finally", 2), ("soon", 2), ("still", 2)]
COMMON_VERBS = "saw found made took gave kept left heard knew brought lost met loved feared " \
               "reached held turned wanted needed".split()
INTRANS = "arrived waited slept smiled laughed rested stopped began returned stayed fell rose " \
          "paused listened".split()
CONJ = [("and", 6), ("but", 4), ("while", 2), ("because", 2), ("so", 2), ("when", 2)]
SAY = "said asked replied whispered answered shouted".split()


def zipf(words, s=1.05):
    return [(w, 1.0 / (i + 1) ** s) for i, w in enumerate(words)]


class Grammar:
    def __init__(self, rng):
        self.rng = rng

    def pick(self, weighted):
        words, weights = zip(*weighted)
        return self.rng.choices(words, weights=weights, k=1)[0]

    def noun(self, topic):
        if self.rng.random() < 0.25:
            return self.pick(zipf(COMMON_NOUNS))
        return self.pick(zipf(topic["nouns"]))

    def np(self, topic, depth=0):
        r = self.rng.random()
        if r < 0.12:
            return [self.pick(PRONOUNS)]
        if r < 0.2:
            return [self.rng.choice(NAMES)]
        words = [self.pick(DETS)]
        if self.rng.random() < 0.45:
            words.append(self.pick(zipf(topic["adjs"])))
        words.append(self.noun(topic))
        if depth == 0 and self.rng.random() < 0.25:
            words += self.pp(topic, depth + 1)
        return words

    def pp(self, topic, depth=0):
        return [self.pick(PREPS)] + self.np(topic, depth)

    def vp(self, topic):
        r = self.rng.random()
        if r < 0.45:
            verb = self.pick(zipf(topic["verbs"])) if self.rng.random() < 0.6 else self.pick(zipf(COMMON_VERBS))
            out = [verb] + self.np(topic)
        elif r < 0.75:
            out = [self.pick(zipf(INTRANS))]
            if self.rng.random() < 0.6:
                out += self.pp(topic)
        else:
            out = [self.pick(zipf(topic["verbs"]))] + self.np(topic) + self.pp(topic)
        if self.rng.random() < 0.2:
            out.append(self.pick(ADVS))
        return out

    def clause(self, topic):
        return self.np(topic) + self.vp(topic)

    def sentence(self, topic):
        r = self.rng.random()
        if r < 0.55:
            words = self.clause(topic)
        elif r < 0.75:
            words = self.clause(topic) + [",", self.pick(CONJ)] + self.clause(topic)
        elif r < 0.85:
            words = [self.pick(ADVS), ","] + self.clause(topic)
        elif r < 0.93:
            words = ["\""] + self.clause(topic) + [",", "\"", self.rng.choice(SAY)] + self.np(topic)
        else:
            words = self.pp(topic) + [","] + self.clause(topic)
        end = "?" if self.rng.random() < 0.05 else ("!" if self.rng.random() < 0.04 else ".")
        words.append(end)
        words[0] = words[0].capitalize() if words[0] != "\"" else words[0]
        return words

    def document(self):
        names = list(TOPICS)
        main = self.rng.choice(names)
        side = self.rng.choice(names)
        sentences = []
        for _ in range(self.rng.randint(4, 12)):
            topic = TOPICS[main] if self.rng.random() < 0.8 else TOPICS[side]
            sentences.append(detok(self.sentence(topic)))
        return " ".join(sentences)


def detok(words):
    out = ""
    quote_open = False
    for w in words:
        if w == "\"":
            if quote_open:
                out += "\""
            else:
                out += (" " if out else "") + "\""
            quote_open = not quote_open
            continue
        if w in ",.?!":
            out += w
        elif out.endswith("\"") and quote_open:
            out += w
        else:
            out += (" " if out else "") + w
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/corpus.txt")
    ap.add_argument("--bytes", type=int, default=1_300_000)
    ap.add_argument("--seed", type=int, default=20240917)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    grammar = Grammar(rng)
    total = 0
    with open(args.out, "w", encoding="utf-8") as f:
        while total < args.bytes:
            doc = grammar.document()
            f.write(doc + "\n")
            total += len(doc.encode("utf-8")) + 1


if __name__ == "__main__":
    main()
