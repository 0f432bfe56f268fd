"""Regenerate the oracle tables used by the acceptance target.

Readability values are evaluated in 50-digit decimal arithmetic; KS series
values with mpmath at 60 digits, summing the alternating series directly.
"""
import csv
import random
from decimal import Decimal, getcontext

import mpmath

getcontext().prec = 50
rng = random.Random(4242)

with open("readability.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["n_words", "n_sentences", "n_characters_in_words", "n_syllables",
                "n_polysyllables", "n_long_words", "n_unique_words",
                "fkgl", "smog", "cli", "lix"])
    for _ in range(50):
        W = rng.randint(1, 400)
        S = rng.randint(1, max(1, W // 3))
        chars = rng.randint(W, 9 * W)
        syl = rng.randint(W, 3 * W)
        poly = rng.randint(0, W)
        long_ = rng.randint(0, W)
        uniq = rng.randint(1, W)
        Wd, Sd = Decimal(W), Decimal(S)
        fk = Decimal("0.39") * (Wd / Sd) + Decimal("11.8") * (Decimal(syl) / Wd) - Decimal("15.59")
        sm = Decimal("1.0430") * (Decimal(poly) * 30 / Sd).sqrt() + Decimal("3.1291")
        L = 100 * Decimal(chars) / Wd
        Sp = 100 * Sd / Wd
        cl = Decimal("0.0588") * L - Decimal("0.296") * Sp - Decimal("15.8")
        lx = Wd / Sd + 100 * Decimal(long_) / Wd
        w.writerow([W, S, chars, syl, poly, long_, uniq] + [format(v, ".20f") for v in (fk, sm, cl, lx)])

mpmath.mp.dps = 60
with open("ks_series.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["lambda", "p"])
    lams = [mpmath.mpf(i) / 100 for i in range(5, 301, 3)]
    lams += [mpmath.mpf("0.29999"), mpmath.mpf("0.3"), mpmath.mpf("0.30001")]
    for l in lams:
        s = mpmath.mpf(0)
        for k in range(1, 3000):
            s += (-1) ** (k - 1) * mpmath.exp(-2 * k * k * l * l)
        p = min(max(2 * s, 0), 1)
        w.writerow([mpmath.nstr(l, 20), mpmath.nstr(p, 25)])
