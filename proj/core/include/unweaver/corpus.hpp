#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace unweaver {

using ChunkId = std::int64_t;

struct Document {
    std::string source_id;
    std::string text;
};

struct SegmentConfig {
    int target_tokens = 256;
    int overlap_tokens = 32;

    /// Throws InvalidArgument unless target_tokens >= 8 and
    /// 0 <= overlap_tokens < target_tokens.
    void validate() const;
};

/// A contiguous run of whitespace tokens from one document. `text` is the
/// original byte span from the first token's start to the last token's end.
struct Chunk {
    ChunkId chunk_id = 0;
    std::string source_id;
    std::string text;
    int first_token = 0;  // index of the first token within its document
    int token_count = 0;

    bool operator==(const Chunk&) const = default;
};

/// Sliding-window segmentation; ids start at `first_chunk_id`.
/// Throws EmptyDocument when the text is blank.
std::vector<Chunk> segment(const Document& doc, const SegmentConfig& cfg,
                           ChunkId first_chunk_id = 0);

/// Segments documents in order, assigning dense ids 0..K-1 across them.
std::vector<Chunk> segment_corpus(const std::vector<Document>& docs,
                                  const SegmentConfig& cfg);

/// Reads every regular .txt/.md file below `root`, sorted by relative path.
/// Blank files are skipped. Throws IoError if `root` is not a directory.
std::vector<Document> load_corpus(const std::filesystem::path& root);

}  // namespace unweaver
