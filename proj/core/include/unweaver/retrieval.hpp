#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "unweaver/embedding.hpp"
#include "unweaver/index.hpp"

namespace unweaver {

enum class Metric { kCosine, kEuclidean };

struct SimilarityConfig {
    Metric metric = Metric::kCosine;
    int k0 = 10;
};

enum class ElectionRule { kAv, kPavGreedy, kCcGreedy, kExactPav, kExactCc };

inline constexpr std::size_t kMaxExactCandidates = 20;

struct ElectionConfig {
    ElectionRule rule = ElectionRule::kAv;
    int r = 5;
};

struct ScoredClass {
    ClassId class_id = 0;
    double score = 0.0;  // cosine similarity, or euclidean distance

    bool operator==(const ScoredClass&) const = default;
};

struct ElectionOutcome {
    std::vector<ChunkId> winners;    // pick order
    std::vector<double> approvals;   // per candidate column sum
    double committee_score = 0.0;    // value of the rule's objective
    bool padded = false;             // some winner has no approval
};

enum class RetrievalStatus { kOk, kNoCandidates };

struct RetrievalResult {
    RetrievalStatus status = RetrievalStatus::kOk;
    std::vector<ScoredClass> selected_classes;  // best first
    std::vector<ClassId> ballot_class_ids;      // row labels of filtered_ballots
    BinaryMatrix filtered_ballots;              // m'×K
    std::vector<ChunkId> elected_chunks;
    std::vector<double> rule_scores;            // per elected chunk
    bool padded = false;
    std::vector<std::string> warnings;
};

/// Cosine similarity between a and b; 0 when either has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Ranks the columns of V (P×S) against q. Cosine ranks descending
/// similarity, euclidean ascending distance; ties go to the lower class id.
/// k0 is clamped to S. Throws DimensionMismatch.
std::vector<ScoredClass> top_k_classes(const Matrix& V, std::span<const double> q,
                                       const SimilarityConfig& cfg);

/// Rows of incidenceᵀ for the selected classes, in ascending class id.
BinaryMatrix filter_ballots(const IncidenceMatrix& incidence,
                            const std::vector<ClassId>& selected);

/// Harmonic number H(n) = 1 + 1/2 + ... + 1/n.
double harmonic(std::size_t n);

/// Objective of `rule` (AV, PAV or CC family) for a committee.
double committee_score(const BinaryMatrix& ballots, const std::vector<ChunkId>& committee,
                       ElectionRule rule);

/// Multi-winner approval election over the columns of `ballots`. r is clamped
/// to the number of candidates. Exact rules throw InvalidArgument above
/// kMaxExactCandidates candidates.
ElectionOutcome elect_chunks(const BinaryMatrix& ballots, const ElectionConfig& cfg);

/// top_k_classes → filter_ballots → elect_chunks on a precomputed query vector.
RetrievalResult retrieve(const Index& index, std::span<const double> query,
                         const SimilarityConfig& sim, const ElectionConfig& election);

/// Embeds `query_text` with the index's embedder, then retrieves.
RetrievalResult retrieve(const Index& index, std::string_view query_text,
                         const SimilarityConfig& sim, const ElectionConfig& election,
                         Gateway* gateway);

/// Orthogonal projection of q onto the column space of V, V V⁺ q.
/// Diagnostic only; V must have full column rank.
Vector project_onto_columns(const Matrix& V, std::span<const double> q);

EmbeddingVector embed_query(const Index& index, std::string_view query_text,
                            Gateway* gateway);

}  // namespace unweaver
