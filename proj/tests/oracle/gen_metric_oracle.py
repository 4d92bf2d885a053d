"""Regenerates tests/fixtures/metric_oracle.json from metric_pairs.jsonl.

Needs sacrebleu (pip install sacrebleu==2.6.0). The output is committed;
the C++ tests only read it.
"""
import json
import pathlib
import sys

import sacrebleu
from sacrebleu.metrics import BLEU, CHRF

HERE = pathlib.Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"


def tokenizer_for(lang):
    return "zh" if lang == "zh" else "13a"


def main():
    pairs = [json.loads(l) for l in (FIXTURES / "metric_pairs.jsonl").read_text(encoding="utf-8").splitlines() if l]
    chrf = CHRF()
    segments = []
    for p in pairs:
        tok = tokenizer_for(p["lang"])
        sent_bleu = BLEU(tokenize=tok, smooth_method="add-k", smooth_value=1, effective_order=True)
        segments.append({
            "lang": p["lang"],
            "tokenize": tok,
            "sentence_bleu": sent_bleu.sentence_score(p["hyp"], [p["ref"]]).score,
            "sentence_chrf": chrf.sentence_score(p["hyp"], [p["ref"]]).score,
            "tokens": sacrebleu.BLEU(tokenize=tok).tokenizer(p["hyp"].rstrip()).split(),
        })
    corpora = {}
    for lang in sorted({p["lang"] for p in pairs}):
        hyps = [p["hyp"] for p in pairs if p["lang"] == lang]
        refs = [p["ref"] for p in pairs if p["lang"] == lang]
        corpora[lang] = {
            "n": len(hyps),
            "bleu": BLEU(tokenize=tokenizer_for(lang)).corpus_score(hyps, [refs]).score,
            "chrf": chrf.corpus_score(hyps, [refs]).score,
        }
    out = {"sacrebleu_version": sacrebleu.__version__, "segments": segments, "corpora": corpora}
    (FIXTURES / "metric_oracle.json").write_text(json.dumps(out, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
