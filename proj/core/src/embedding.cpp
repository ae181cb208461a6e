#include "unweaver/embedding.hpp"

#include <cmath>
#include <iostream>

#include "unweaver/errors.hpp"
#include "unweaver/linalg.hpp"
#include "unweaver/text.hpp"

namespace unweaver {
namespace {

constexpr std::string_view kTokenPunct = ".,;:!?\"'()[]{}";

std::string_view strip_punct(std::string_view token) {
    while (!token.empty() && kTokenPunct.find(token.front()) != std::string_view::npos) {
        token.remove_prefix(1);
    }
    while (!token.empty() && kTokenPunct.find(token.back()) != std::string_view::npos) {
        token.remove_suffix(1);
    }
    return token;
}

}  // namespace

void EmbedConfig::validate() const {
    if (dim < 1 || (backend == EmbedBackend::kStub && dim < 2)) {
        throw InvalidArgument("embedding dim must be >= 2 for the stub backend");
    }
    if (batch_size < 1) {
        throw InvalidArgument("embedding batch_size must be >= 1");
    }
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

EmbeddingVector embed_stub(std::string_view text, int dim) {
    if (dim < 2) {
        throw InvalidArgument("stub embedding dim must be >= 2");
    }
    EmbeddingVector counts(static_cast<std::size_t>(dim), 0.0);
    for (const auto token : text::split_whitespace(text)) {
        const auto core = strip_punct(token);
        if (core.empty()) {
            continue;
        }
        const auto folded = text::fold_case(core);
        counts[fnv1a64(folded) % static_cast<std::uint64_t>(dim)] += 1.0;
    }
    const double norm = norm2(counts);
    if (norm == 0.0) {
        std::cerr << "warning: embedding text without tokens; using the zero vector\n";
        return counts;
    }
    for (auto& v : counts) {
        v /= norm;
    }
    return counts;
}

std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                   const EmbedConfig& cfg, Gateway* gateway, Phase phase) {
    cfg.validate();
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    if (cfg.backend == EmbedBackend::kStub) {
        for (const auto& t : texts) {
            out.push_back(embed_stub(t, cfg.dim));
        }
        return out;
    }

    if (gateway == nullptr) {
        throw InvalidArgument("api embedder requires a configured gateway");
    }
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < texts.size(); start += batch) {
        EmbedRequest request;
        request.model = gateway->config().embed_model;
        const auto end = std::min(texts.size(), start + batch);
        request.input.assign(texts.begin() + static_cast<std::ptrdiff_t>(start),
                             texts.begin() + static_cast<std::ptrdiff_t>(end));
        auto response = gateway->embed(request, phase);
        for (auto& v : response.vectors) {
            if (v.size() != static_cast<std::size_t>(cfg.dim)) {
                throw DimensionMismatch("embedder returned dimension " + std::to_string(v.size()) +
                                        ", expected " + std::to_string(cfg.dim));
            }
            for (const double x : v) {
                if (!std::isfinite(x)) {
                    throw BackendError("embedder returned a non-finite value", 200);
                }
            }
            out.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace unweaver
