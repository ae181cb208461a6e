#include "unweaver/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "unweaver/errors.hpp"

namespace unweaver {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

std::vector<ScoredClass> top_k_classes(const Matrix& V, std::span<const double> q,
                                       const SimilarityConfig& cfg) {
    if (cfg.k0 < 1) {
        throw InvalidArgument("k0 must be >= 1");
    }
    if (q.size() != V.rows()) {
        throw DimensionMismatch("query has dimension " + std::to_string(q.size()) +
                                ", index has " + std::to_string(V.rows()));
    }

    const std::size_t s_count = V.cols();
    std::vector<ScoredClass> scored(s_count);
    for (std::size_t s = 0; s < s_count; ++s) {
        const Vector col = V.col(s);
        scored[s].class_id = static_cast<ClassId>(s);
        scored[s].score = cfg.metric == Metric::kCosine ? cosine_similarity(col, q)
                                                        : norm2(subtract(col, q));
    }
    const bool descending = cfg.metric == Metric::kCosine;
    std::stable_sort(scored.begin(), scored.end(),
                     [descending](const ScoredClass& a, const ScoredClass& b) {
                         return descending ? a.score > b.score : a.score < b.score;
                     });
    scored.resize(std::min(s_count, static_cast<std::size_t>(cfg.k0)));
    return scored;
}

BinaryMatrix filter_ballots(const IncidenceMatrix& incidence,
                            const std::vector<ClassId>& selected) {
    std::vector<ClassId> rows(selected);
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

    BinaryMatrix ballots(rows.size(), incidence.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto s = static_cast<std::size_t>(rows[i]);
        if (rows[i] < 0 || s >= incidence.cols()) {
            throw InvalidArgument("selected class " + std::to_string(rows[i]) + " out of range");
        }
        for (std::size_t k = 0; k < incidence.rows(); ++k) {
            ballots.set(i, k, incidence.at(k, s));
        }
    }
    return ballots;
}

RetrievalResult retrieve(const Index& index, std::span<const double> query,
                         const SimilarityConfig& sim, const ElectionConfig& election) {
    RetrievalResult result;
    if (election.r < 1) {
        throw InvalidArgument("election size r must be >= 1");
    }
    if (index.num_classes() == 0 || index.num_chunks() == 0) {
        result.status = RetrievalStatus::kNoCandidates;
        return result;
    }
    if (static_cast<std::size_t>(sim.k0) > index.num_classes()) {
        result.warnings.push_back("k0 clamped to the number of classes (" +
                                  std::to_string(index.num_classes()) + ")");
    }
    if (static_cast<std::size_t>(election.r) > index.num_chunks()) {
        result.warnings.push_back("r clamped to the number of chunks (" +
                                  std::to_string(index.num_chunks()) + ")");
    }

    result.selected_classes = top_k_classes(index.embeddings, query, sim);
    for (const auto& sc : result.selected_classes) {
        result.ballot_class_ids.push_back(sc.class_id);
    }
    std::sort(result.ballot_class_ids.begin(), result.ballot_class_ids.end());
    result.filtered_ballots = filter_ballots(index.incidence, result.ballot_class_ids);

    const auto outcome = elect_chunks(result.filtered_ballots, election);
    result.elected_chunks = outcome.winners;
    for (const auto c : outcome.winners) {
        result.rule_scores.push_back(outcome.approvals[static_cast<std::size_t>(c)]);
    }
    result.padded = outcome.padded;
    if (outcome.padded) {
        result.warnings.push_back("fewer than r chunks are approved; padded by chunk id");
    }
    return result;
}

EmbeddingVector embed_query(const Index& index, std::string_view query_text,
                            Gateway* gateway) {
    auto vectors = embed({std::string(query_text)}, index.config.embed, gateway, Phase::kQuery);
    if (vectors.front().size() != index.dim()) {
        throw DimensionMismatch("query embedding has dimension " +
                                std::to_string(vectors.front().size()) + ", index has " +
                                std::to_string(index.dim()));
    }
    return std::move(vectors.front());
}

RetrievalResult retrieve(const Index& index, std::string_view query_text,
                         const SimilarityConfig& sim, const ElectionConfig& election,
                         Gateway* gateway) {
    if (index.num_classes() == 0) {
        RetrievalResult empty;
        empty.status = RetrievalStatus::kNoCandidates;
        return empty;
    }
    const auto q = embed_query(index, query_text, gateway);
    return retrieve(index, q, sim, election);
}

Vector project_onto_columns(const Matrix& V, std::span<const double> q) {
    const Matrix pinv = pseudoinverse(V);
    return matvec(V, matvec(pinv, q));
}

}  // namespace unweaver
