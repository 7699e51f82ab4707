"""Verbatim-leakage screen between source notes and synthetic charts.

A chart leaks if it shares any run of 12 consecutive tokens with a
source note. Tokens are lowercased words and punctuation, so trivial
casing or spacing changes cannot hide a copied passage.
"""

from __future__ import annotations

from ..prep.tokenizer import WhitespaceTokenizer

SHINGLE_TOKENS = 12

_tokenizer = WhitespaceTokenizer()


def token_shingles(text: str, n: int = SHINGLE_TOKENS) -> frozenset[tuple[str, ...]]:
    tokens = [t.lower() for t in _tokenizer.tokenize(text)]
    if len(tokens) < n:
        return frozenset()
    return frozenset(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def leakage_screen(charts, source_texts, n: int = SHINGLE_TOKENS) -> list[dict]:
    """Corpus-wide screen; returns one violation record per leaky pair."""
    source_shingles = [
        (idx, token_shingles(text, n)) for idx, text in enumerate(source_texts)
    ]
    violations: list[dict] = []
    for chart in charts:
        chart_sh = token_shingles("\n".join(chart.lines), n)
        if not chart_sh:
            continue
        for idx, src_sh in source_shingles:
            overlap = chart_sh & src_sh
            if overlap:
                violations.append(
                    {
                        "chart_id": chart.chart_id,
                        "source_index": idx,
                        "shingles": len(overlap),
                    }
                )
    return violations
