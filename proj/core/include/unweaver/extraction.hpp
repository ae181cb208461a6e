#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unweaver/corpus.hpp"

namespace unweaver {

class Gateway;

inline constexpr std::size_t kMaxNameLength = 256;

/// One (name, description) pair produced from a single chunk.
struct EntityMention {
    std::string name;
    std::string description;
    ChunkId chunk_id = 0;

    bool operator==(const EntityMention&) const = default;
};

enum class ExtractorBackend { kStub, kLlm };

struct ExtractorConfig {
    ExtractorBackend backend = ExtractorBackend::kStub;
    int shorten_threshold = 1024;
    std::optional<int> max_mentions_per_chunk;  // unlimited when empty
    int max_concurrent_requests = 4;
    /// Shorten over-long descriptions with the chat model instead of
    /// truncating. Only honoured with the llm backend.
    bool llm_shortening = false;

    void validate() const;
};

/// Extracts entity mentions from one chunk. Duplicate names (after
/// normalization) are merged, the optional cap applied, then every
/// description is shortened to `shorten_threshold`.
///
/// Throws BackendError or MalformedOutput for the llm backend.
std::vector<EntityMention> extract(const Chunk& chunk, const ExtractorConfig& cfg,
                                   Gateway* gateway);

/// Runs `extract` over all chunks with at most `max_concurrent_requests` in
/// flight. Results are concatenated in chunk order.
std::vector<EntityMention> extract_all(const std::vector<Chunk>& chunks,
                                       const ExtractorConfig& cfg, Gateway* gateway);

/// Deterministic offline extractor: maximal runs of capitalized words (each at
/// least two code points, sentence-initial stopwords excluded); the
/// description is every sentence of the chunk containing the name.
std::vector<EntityMention> extract_stub(const Chunk& chunk);

/// Splits text into trimmed sentences at . ! ? followed by white space or the
/// end of text, and at blank lines.
std::vector<std::string_view> split_sentences(std::string_view text);

/// Parses a model reply of the form [{"name": ..., "description": ...}, ...],
/// tolerating surrounding prose or a fenced code block. Entries with a blank
/// name or description are dropped. Throws MalformedOutput.
std::vector<EntityMention> parse_extraction_output(std::string_view content,
                                                   ChunkId chunk_id);

/// Merges mentions whose names normalize equally, keeping the first name and
/// joining descriptions with a single space.
std::vector<EntityMention> merge_duplicate_mentions(std::vector<EntityMention> mentions);

/// Offline shortening: returns `description` unchanged when it fits, otherwise
/// cuts at the last white space that leaves room for a trailing "…" (a hard
/// cut when there is none). Lengths are in code points.
std::string truncate_description(std::string_view description, int threshold);

/// Shortens with the chat model when `gateway` is non-null, falling back to
/// `truncate_description` on any backend failure or over-long reply.
std::string shorten(std::string_view description, int threshold,
                    Gateway* gateway = nullptr);

/// Prompt used by the llm backend.
std::string extraction_prompt(std::string_view chunk_text);

}  // namespace unweaver
