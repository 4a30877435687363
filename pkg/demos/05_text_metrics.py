"""BLEU-4 and ROUGE-1/2/L from first principles, then scoring toy generations.

Run: python demos/05_text_metrics.py
"""

from prefalign.evalmetrics import bleu4, rouge_l, rouge_n, score_corpus, tokenize
from prefalign.losses import Family, LossParams
from prefalign.toylm import generate, generate_dataset, train

# --- sentence-level anatomy -----------------------------------------------------

ref = tokenize("the quick brown fox jumps over the lazy dog")
candidates = [
    "the quick brown fox jumps over the lazy dog",
    "the quick brown fox jumped over a lazy dog",
    "a fast auburn fox leaps over dogs",
    "dog lazy the over jumps fox brown quick the",
]
print("BLEU-4 and ROUGE vs a fixed reference:")
print(f"{'candidate':<46} {'bleu4':>7} {'r1-f1':>7} {'r2-f1':>7} {'rL-f1':>7}")
for text in candidates:
    hyp = tokenize(text)
    print(
        f"{text:<46} {bleu4(hyp, [ref]):7.3f} {rouge_n(hyp, ref, 1).f1:7.3f} "
        f"{rouge_n(hyp, ref, 2).f1:7.3f} {rouge_l(hyp, ref).f1:7.3f}"
    )
print("note the last row: a bag-of-words copy keeps ROUGE-1 at 1.0 but BLEU-4")
print("and ROUGE-L collapse because order is gone.")

print("\nbrevity penalty: perfect prefixes are still penalized for being short:")
for k in (9, 6, 4):
    hyp = ref[:k]
    print(f"  first {k} tokens -> bleu4 = {bleu4(hyp, [ref]):.4f}")

# --- scoring the toy model -------------------------------------------------------

print("\nscoring toy-model generations against the preferred responses:")
dataset = generate_dataset(200, seed=5)
params = LossParams(family=Family.ASFT)
_, policy = train(dataset, params, steps=80, seed=9, lr=0.05, batch_size=32)

hyps, refs = [], []
for triple in dataset[:50]:
    hyps.append(generate(policy, triple.prompt, max_len=len(triple.chosen)))
    refs.append(list(triple.chosen))
report = score_corpus(hyps, refs, smooth=1e-9)
print(f"  segments scored:   {report.segments}")
print(f"  bleu4 (smoothed):  {report.bleu4:.4f}")
print(f"  rouge1 f1:         {report.rouge1.f1:.4f}")
print(f"  rouge2 f1:         {report.rouge2.f1:.4f}")
print(f"  rougeL f1:         {report.rougeL.f1:.4f}")
print("the toy model recovers the preferred word class, so unigram overlap is")
print("high while exact n-gram order (BLEU, ROUGE-2) stays modest.")
