#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "unweaver/gateway.hpp"

namespace unweaver {

using EmbeddingVector = std::vector<double>;

enum class EmbedBackend { kStub, kApi };

struct EmbedConfig {
    EmbedBackend backend = EmbedBackend::kStub;
    int dim = 64;
    int batch_size = 64;

    void validate() const;
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Token-hash bag: each case-folded whitespace token (outer punctuation
/// stripped) adds one to bucket fnv1a64(token) % dim; the counts are then
/// L2-normalized. Text without tokens maps to the zero vector.
EmbeddingVector embed_stub(std::string_view text, int dim);

/// Embeds texts in order. The api backend goes through `gateway` in batches
/// of `batch_size` and throws DimensionMismatch when a returned vector's
/// length differs from `cfg.dim`.
std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                   const EmbedConfig& cfg, Gateway* gateway,
                                   Phase phase);

}  // namespace unweaver
