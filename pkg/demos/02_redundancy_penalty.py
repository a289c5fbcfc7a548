"""Show how near-duplicate evidence loses weight instead of double-counting.

Three sources repeat the same trial result (one is a press release that
copies the abstract almost verbatim), while a fourth contributes a
genuinely independent failure to replicate. Without the redundancy
penalty the three echoes shout down the replication; with it, each
chunk is discounted by its highest similarity to anything said before,
so copies contribute almost nothing.
"""

from claimaudit.redundancy import cosine, document_weight, redundancy_for_texts, tfidf_fit
from claimaudit.scoring import HvParams, Tallies, aggregate, hv, make_contribution

# One chunk per document, ordered by retrieval score.
DOCUMENTS = [
    ("trial", 1, "randomized trial shows the supplement lowered relapse rates in adults"),
    ("press", 1, "randomized trial shows the supplement lowered relapse rates in adults study hailed"),
    ("blog", 1, "the supplement lowered relapse rates, a randomized trial shows"),
    ("replication", -1, "independent replication found no difference in relapse rates between groups"),
]


def main() -> None:
    texts = [text for _, _, text in DOCUMENTS]
    model = tfidf_fit(texts)
    print("pairwise similarity to the original trial report:")
    for (doc_id, _, text) in DOCUMENTS[1:]:
        sim = cosine(model.transform(texts[0]), model.transform(text))
        print(f"  trial vs {doc_id:12s} cosine={sim:.3f}")

    rhos = redundancy_for_texts(texts)
    print("\nper-chunk redundancy (max similarity to any preceding chunk):")
    weights = {}
    for (doc_id, _, _), rho in zip(DOCUMENTS, rhos):
        _, weight = document_weight([rho])
        weights[doc_id] = weight
        print(f"  {doc_id:12s} rho={rho:.3f}  information-gain weight w={weight:.3f}")

    params = HvParams(alpha=0.5, lambda_=0.1)
    quality = 0.8  # same audit quality for every document, to isolate the weights

    def tallies_with(weight_of) -> Tallies:
        return aggregate(
            make_contribution(doc_id, stance, quality, weight_of(doc_id))
            for doc_id, stance, _ in DOCUMENTS
        )

    naive = tallies_with(lambda _: 1.0)
    weighted = tallies_with(lambda doc_id: weights[doc_id])
    print(f"\nall weights forced to 1: support={naive.h_support:.2f} vs refute={naive.h_refute:.2f}"
          f" -> score {hv(naive, params):.3f} (echoes win)")
    print(f"redundancy-weighted:     support={weighted.h_support:.2f} vs refute={weighted.h_refute:.2f}"
          f" -> score {hv(weighted, params):.3f} (one trial vs one replication)")

    # Pasting in an exact copy of a chunk adds nothing at all.
    extended = texts + [texts[0]]
    rho_copy = redundancy_for_texts(extended)[-1]
    _, w_copy = document_weight([rho_copy])
    print(f"\nappending an exact copy of the trial chunk: rho={rho_copy:.6f}, w={w_copy:.2e}"
          " -> its contribution vanishes")


if __name__ == "__main__":
    main()
