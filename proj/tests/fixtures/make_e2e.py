#!/usr/bin/env python3
"""Writes the end-to-end pipeline fixture and its expected outcome.

Usage: make_e2e.py OUT_DIR

The expected values in expected.json are computed here, independently of the
C++ code: which items the scripted teacher lets through, which duplicate the
mix drops, how a topic-stratified holdout allocates by largest remainder, and
the accuracy a topic-keyed scripted model must reach on that holdout.
"""

import json
import sys
from fractions import Fraction
from pathlib import Path

LETTERS = "ABCDE"
TOPICS = {
    "mat-limit": ("Matematik", "Limit", "Limit kavramını açıklar"),
    "mat-turev": ("Matematik", "Türev", "Türev kurallarını uygular"),
    "fiz-kuvvet": ("Fizik", "Kuvvet", "Net kuvveti hesaplar"),
    "kim-mol": ("Kimya", "Mol", "Mol kavramını kullanır"),
    "bio-hucre": ("Biyoloji", "Hücre", "Hücre yapısını tanır"),
}
# The scripted model answers these topics correctly and every other topic wrongly.
CORRECT_TOPICS = {"mat-limit", "mat-turev"}
HOLDOUT = 12
SEED = 20240611
REJECT = "Belki de cevap şu olabilir, emin değilim."


def meta(topic):
    subject, unit, objective = TOPICS[topic]
    return {"subject": subject, "unit": unit, "objective": objective, "topic_id": topic}


def candidate(gold, n):
    return (f"<think>Adım adım ilerleyelim ({n}).</think>\n"
            f"<solution>Verilenler yerine konur ve sonuç {gold} seçeneğini verir.</solution>\n"
            f"<answer>{gold}</answer>")


def make_items(prefix, source, count, topic_cycle):
    items = []
    for i in range(1, count + 1):
        topic = topic_cycle[(i - 1) % len(topic_cycle)]
        gold = LETTERS[(i * 3) % 5]
        items.append({
            "id": f"{prefix}-{i:02d}",
            "source_tag": source,
            "question_text": f"{source} sorusu {i}: {TOPICS[topic][1]} konusunda hangisi doğrudur?",
            "choices": {l: f"Seçenek {l}{i}" for l in LETTERS},
            "gold_answer": gold,
            "meta": meta(topic),
        })
    return items


def site_files():
    """(relative path, content, expected triplets as (question, answer, topic))."""
    docs = []
    docs.append(("blog/limits.html", """<!doctype html>
<html><head><title>Limit Soruları</title>
<meta name="curriculum:subject" content="Matematik">
<meta name="curriculum:unit" content="Limit">
<meta name="curriculum:objective" content="Limit kavramını açıklar">
<meta name="curriculum:topic_id" content="mat-limit">
</head><body>
<nav class="navbar"><a href="/">Ana sayfa</a> <a href="/blog">Blog</a></nav>
<article>
<h1>Limit Soruları</h1>
<p>Limit, bir fonksiyonun bir noktaya yaklaşırken aldığı değeri anlatır.</p>
<img src="../img/limit-graph.png" alt="grafik">
<p>Grafikte fonksiyonun sağdan ve soldan limitleri görülüyor.</p>
<p><strong>Soru 1:</strong> <span class="katex"><math><semantics><mrow><mi>x</mi></mrow><annotation encoding="application/x-tex">\\lim_{x \\to 2} (x^2 + 1)</annotation></semantics></math></span> limitinin değeri kaçtır?</p>
<p>Çözüm: Polinom sürekli olduğundan yerine koyarız, sonuç 5 olur.</p>
<p>Cevap: B</p>
<p><strong>Soru 2:</strong> Sağdan ve soldan limit eşit değilse limit için ne söylenir?</p>
<p>Çözüm: Tek taraflı limitler farklı olduğundan limit yoktur.</p>
<p>Cevap: (D)</p>
</article>
<footer class="site-footer">Tüm hakları saklıdır.</footer>
</body></html>
""", [("mat-limit", "B"), ("mat-limit", "D")]))
    docs.append(("blog/derivatives.html", """<html><head><title>Türev</title>
<meta name="curriculum:subject" content="Matematik">
<meta name="curriculum:unit" content="Türev">
<meta name="curriculum:objective" content="Türev kurallarını uygular">
<meta name="curriculum:topic_id" content="mat-turev">
</head><body>
<div class="sidebar"><ul><li><a href="/a">Bağlantı bir</a></li><li><a href="/b">Bağlantı iki</a></li></ul></div>
<div class="post-content">
<h2>Türev kuralları</h2>
<p>Bu yazıda türev kurallarını sunumla birlikte inceliyoruz.</p>
<iframe src="https://example.org/slides/deck-turev/embed"></iframe>
<p>Sunumdaki örnekler aşağıdaki sorulara hazırlık niteliğindedir.</p>
<p><b>Soru 1.</b> f(x) = 3x^2 ise f'(1) kaçtır?</p>
<p><b>Çözüm:</b> f'(x) = 6x olduğundan f'(1) = 6 bulunur.</p>
<p><b>Cevap:</b> C</p>
<p><b>Soru 2.</b> g(x) = x^3 ise g''(x) nedir?</p>
<p><b>Çözüm:</b> g'(x) = 3x^2 ve g''(x) = 6x olur.</p>
<p><b>Soru 3.</b> Sabit fonksiyonun türevi nedir?</p>
<p><b>Çözüm:</b> Sabitin türevi sıfırdır.</p>
<p><b>Cevap:</b> A</p>
</div>
<div class="comments"><p>Harika yazı!</p></div>
</body></html>
""", [("mat-turev", "C"), ("mat-turev", "A")]))
    docs.append(("blog/physics.html", """<html><head><title>Kuvvet</title>
<meta name="curriculum:subject" content="Fizik">
<meta name="curriculum:unit" content="Kuvvet">
<meta name="curriculum:objective" content="Net kuvveti hesaplar">
<meta name="curriculum:topic_id" content="fiz-kuvvet">
</head><body>
<div id="menu"><a href="/">Ana</a> | <a href="/fizik">Fizik</a> | <a href="/kimya">Kimya</a></div>
<div id="content">
<p>Net kuvvet, cisme etki eden tüm kuvvetlerin vektörel toplamıdır.</p>
<p><img src="/img/forces.png"></p>
<p>Şekilde iki kuvvet zıt yönde etki ediyor.</p>
<p>Soru 1: 10 N ve 4 N büyüklüğündeki zıt yönlü iki kuvvetin bileşkesi kaç N olur?</p>
<p>Çözüm: Zıt yönlü kuvvetler çıkarılır: <script type="math/tex">10 - 4 = 6</script> N.</p>
<p>Cevap: E</p>
<p>Soru 2: Newton'un ikinci yasası hangi bağıntıyla ifade edilir?</p>
<p><img src="/img/newton.png"></p>
<p>Çözüm: Kuvvet, kütle ile ivmenin çarpımına eşittir.</p>
<p>Cevap: A</p>
</div>
</body></html>
""", [("fiz-kuvvet", "E"), ("fiz-kuvvet", "A")]))
    docs.append(("notes/chem.md", """---
title: Mol Kavramı
subject: Kimya
unit: Mol
objective: Mol kavramını kullanır
topic_id: kim-mol
---
# Mol Kavramı

Bir mol, Avogadro sayısı kadar tanecik içerir.

![tablo](../img/periodic.png)

Periyodik tablodan atom kütleleri okunur.

**Soru 1:** 18 gram su kaç moldür?

**Çözüm:** Suyun mol kütlesi 18 g/mol olduğundan 1 mol eder.

**Cevap:** B

**Soru 2:** 2 mol karbon kaç gramdır?

**Çözüm:** Karbonun mol kütlesi 12 g/mol, dolayısıyla 24 gramdır.

**Cevap:** D
""", [("kim-mol", "B"), ("kim-mol", "D")]))
    docs.append(("notes/bio.html", """<html><head><title>Hücre</title>
<meta name="curriculum:subject" content="Biyoloji">
<meta name="curriculum:unit" content="Hücre">
<meta name="curriculum:objective" content="Hücre yapısını tanır">
<meta name="curriculum:topic_id" content="bio-hucre">
</head><body>
<header><p>Biyoloji notları</p></header>
<main>
<p>Hücre, canlıların yapı ve işlev birimidir.</p>
<img src="cell.png">
<p>Hücre zarı seçici geçirgendir.</p>
<img src="cell.png">
<p>Soru 1: Protein sentezi hangi organelde gerçekleşir?</p>
<p>Çözüm: Protein sentezi ribozomda yapılır.</p>
<p>Yanıt: (C)</p>
</main>
</body></html>
""", [("bio-hucre", "C")]))
    return docs


def largest_remainder(sizes, quota):
    total = sum(sizes.values())
    shares = {k: Fraction(v * quota, total) for k, v in sizes.items()}
    alloc = {k: int(s) for k, s in shares.items()}
    left = quota - sum(alloc.values())
    order = sorted(sizes, key=lambda k: (-(shares[k] - int(shares[k])), k))
    for k in order[:left]:
        alloc[k] += 1
    return alloc


def main():
    out = Path(sys.argv[1])
    (out / "site/img").mkdir(parents=True, exist_ok=True)
    (out / "site/notes").mkdir(parents=True, exist_ok=True)
    (out / "site/blog").mkdir(parents=True, exist_ok=True)
    deck = out / "site/decks/deck-turev"
    deck.mkdir(parents=True, exist_ok=True)
    png = bytes.fromhex("89504e470d0a1a0a")
    for name in ["img/limit-graph.png", "img/forces.png", "img/newton.png", "img/periodic.png", "notes/cell.png"]:
        (out / "site" / name).write_bytes(png)
    for i in range(1, 4):
        (deck / f"page-{i:02d}.png").write_bytes(png)

    docs = site_files()
    cv = []
    for rel, content, triplets in docs:
        (out / "site" / rel).write_text(content, encoding="utf-8")
        doc_id = rel.rsplit(".", 1)[0].replace("/", "-")
        for n, (topic, gold) in enumerate(triplets, start=1):
            cv.append({"id": f"{doc_id}-t{n}", "topic": topic, "gold": gold})

    topics = list(TOPICS)
    cr = make_items("cr", "CR", 16, topics)
    mr = make_items("mr", "MR", 16, topics)
    # mr-09 repeats cr-04's question with different spacing and case.
    mr[8]["question_text"] = "  " + cr[3]["question_text"].upper().replace(" ", "   ") + " "
    mr[8]["meta"] = cr[3]["meta"]

    cr_script, cr_excluded = {}, {"cr-03", "cr-07"}
    for it in cr:
        cr_script[it["id"]] = [REJECT] if it["id"] in cr_excluded else [candidate(it["gold_answer"], 1)]
    mr_script, mr_excluded, mr_fallback = {}, {"mr-05"}, {"mr-02", "mr-11"}
    for it in mr:
        if it["id"] in mr_excluded:
            mr_script[it["id"]] = [REJECT] * 11
        elif it["id"] in mr_fallback:
            mr_script[it["id"]] = [REJECT] * 8 + [candidate(it["gold_answer"], 9)]
        else:
            mr_script[it["id"]] = [candidate(it["gold_answer"], 1)]
    transcripts = {it["id"]: f"Video anlatımı: {it['question_text'][:20]}" for it in mr}

    def write_jsonl(path, rows):
        path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")

    write_jsonl(out / "cr.jsonl", cr)
    write_jsonl(out / "mr.jsonl", mr)
    (out / "teacher_cr.json").write_text(json.dumps({"items": cr_script}, ensure_ascii=False), encoding="utf-8")
    (out / "teacher_mr.json").write_text(json.dumps({"items": mr_script}, ensure_ascii=False), encoding="utf-8")
    (out / "transcripts.json").write_text(json.dumps(transcripts, ensure_ascii=False), encoding="utf-8")

    # Surviving pool after distillation and dedupe.
    pool = {}
    for it in cr:
        if it["id"] not in cr_excluded:
            pool[it["id"]] = (it["meta"]["topic_id"], it["gold_answer"])
    for it in mr:
        if it["id"] not in mr_excluded and it["id"] != "mr-09":
            pool[it["id"]] = (it["meta"]["topic_id"], it["gold_answer"])
    for c in cv:
        pool[c["id"]] = (c["topic"], c["gold"])

    sizes = {}
    for topic, _ in pool.values():
        sizes[topic] = sizes.get(topic, 0) + 1
    alloc = largest_remainder(sizes, HOLDOUT)
    correct = sum(n for t, n in alloc.items() if t in CORRECT_TOPICS)

    responses = {}
    for item_id, (topic, gold) in sorted(pool.items()):
        letter = gold if topic in CORRECT_TOPICS else LETTERS[(LETTERS.index(gold) + 1) % 5]
        responses[item_id] = f"Düşünelim. Sonuç olarak <answer>{letter}</answer>"
    (out / "model.json").write_text(json.dumps({"responses": responses}, ensure_ascii=False), encoding="utf-8")

    expected = {
        "seed": SEED,
        "holdout": HOLDOUT,
        "ingest": {"documents": 5, "markdowns": 5, "images": 5, "decks": 1, "pages": 3, "triplets": len(cv)},
        "cr": {"total": 16, "primary_accepted": 14, "fallback_accepted": 0, "excluded": 2, "errored": 0},
        "mr": {"total": 16, "primary_accepted": 13, "fallback_accepted": 2, "excluded": 1, "errored": 0},
        "mix_total": len(pool),
        "dedupe_drops": 1,
        "topic_sizes": sizes,
        "test_per_topic": alloc,
        "correct": correct,
        "planted_accuracy": correct / HOLDOUT,
    }
    (out / "expected.json").write_text(json.dumps(expected, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
