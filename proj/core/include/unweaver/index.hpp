#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "unweaver/corpus.hpp"
#include "unweaver/embedding.hpp"
#include "unweaver/extraction.hpp"
#include "unweaver/gateway.hpp"
#include "unweaver/linalg.hpp"

namespace unweaver {

using ClassId = std::int64_t;

inline constexpr int kIndexSchemaVersion = 1;

/// Dense 0/1 matrix stored row-major.
class BinaryMatrix {
public:
    BinaryMatrix() = default;
    BinaryMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}
    BinaryMatrix(std::initializer_list<std::initializer_list<int>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    bool at(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool v = true) {
        bits_[r * cols_ + c] = v ? 1 : 0;
    }

    std::size_t row_sum(std::size_t r) const;
    std::size_t col_sum(std::size_t c) const;

    BinaryMatrix transposed() const;
    Matrix to_matrix() const;

    bool operator==(const BinaryMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// K×S chunk-by-class incidence: (k, s) is set iff class s occurs in chunk k.
using IncidenceMatrix = BinaryMatrix;

/// Mentions whose names normalize equally, with their descriptions
/// concatenated in chunk order.
struct EquivalenceClass {
    ClassId class_id = 0;
    std::string display_name;
    std::string normalized_name;
    std::vector<EntityMention> members;  // ascending chunk_id, stable
    std::string concat_description;      // member descriptions joined by "\n"
    std::set<ChunkId> chunk_ids;

    bool operator==(const EquivalenceClass&) const = default;
};

struct IndexConfig {
    SegmentConfig segment;
    ExtractorConfig extractor;
    EmbedConfig embed;

    void validate() const;
};

struct Index {
    IndexConfig config;
    std::vector<Chunk> chunks;
    std::vector<EquivalenceClass> classes;
    IncidenceMatrix incidence;  // K×S
    Matrix embeddings;          // P×S, column s embeds classes[s]
    TokenUsage token_usage;

    std::size_t num_chunks() const noexcept { return chunks.size(); }
    std::size_t num_classes() const noexcept { return classes.size(); }
    std::size_t dim() const noexcept { return embeddings.rows(); }

    /// Looks a class up by (unnormalized) entity name; nullptr if absent.
    const EquivalenceClass* find_class(std::string_view name) const;
};

/// NFKC, full case folding, internal white space collapsed to one space, and
/// the characters .,;:!?"'() stripped from both ends.
std::string normalize_name(std::string_view name);

/// Partitions mentions by normalized name. Ids follow first appearance in
/// (chunk_id, input order); the display name is the first member's name.
std::vector<EquivalenceClass> build_classes(std::vector<EntityMention> mentions);

/// Throws ChunkIdOutOfRange when a class references a chunk >= num_chunks.
IncidenceMatrix build_incidence(const std::vector<EquivalenceClass>& classes,
                                std::size_t num_chunks);

/// Text fed to the embedder for a class: the concatenated description,
/// re-shortened to 4× the shorten threshold.
std::string embedding_text(const EquivalenceClass& cls, int shorten_threshold);

/// Assembles an index from already-segmented chunks and extracted mentions.
/// Throws IndexEmpty when there are no mentions.
Index assemble_index(const IndexConfig& config, std::vector<Chunk> chunks,
                     std::vector<EntityMention> mentions, Gateway* gateway);

/// segment → extract → build_classes → build_incidence → embed.
Index build_index(const std::filesystem::path& corpus_dir, const IndexConfig& config,
                  Gateway* gateway);

std::string index_to_json(const Index& index);
Index index_from_json(std::string_view json);

/// Throws IoError.
void save_index(const Index& index, const std::filesystem::path& path);
/// Throws IoError or SchemaVersionMismatch.
Index load_index(const std::filesystem::path& path);

}  // namespace unweaver
