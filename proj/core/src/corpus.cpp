#include "unweaver/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "unweaver/errors.hpp"
#include "unweaver/text.hpp"

namespace unweaver {

void SegmentConfig::validate() const {
    if (target_tokens < 8) {
        throw InvalidArgument("target_tokens must be >= 8");
    }
    if (overlap_tokens < 0 || overlap_tokens >= target_tokens) {
        throw InvalidArgument("overlap_tokens must satisfy 0 <= overlap < target_tokens");
    }
}

std::vector<Chunk> segment(const Document& doc, const SegmentConfig& cfg,
                           ChunkId first_chunk_id) {
    cfg.validate();
    const auto tokens = text::whitespace_tokens(doc.text);
    if (tokens.empty()) {
        throw EmptyDocument("document '" + doc.source_id + "' is empty");
    }

    const auto n = tokens.size();
    const auto target = static_cast<std::size_t>(cfg.target_tokens);
    const auto stride = target - static_cast<std::size_t>(cfg.overlap_tokens);

    std::vector<Chunk> chunks;
    ChunkId id = first_chunk_id;
    for (std::size_t start = 0;; start += stride) {
        const std::size_t end = std::min(start + target, n);
        const std::size_t byte_begin = tokens[start].begin;
        const std::size_t byte_end = tokens[end - 1].end;
        chunks.push_back(Chunk{
            .chunk_id = id++,
            .source_id = doc.source_id,
            .text = doc.text.substr(byte_begin, byte_end - byte_begin),
            .first_token = static_cast<int>(start),
            .token_count = static_cast<int>(end - start),
        });
        if (end == n) {
            break;
        }
    }
    return chunks;
}

std::vector<Chunk> segment_corpus(const std::vector<Document>& docs,
                                  const SegmentConfig& cfg) {
    std::vector<Chunk> chunks;
    for (const auto& doc : docs) {
        auto part = segment(doc, cfg, static_cast<ChunkId>(chunks.size()));
        chunks.insert(chunks.end(), std::make_move_iterator(part.begin()),
                      std::make_move_iterator(part.end()));
    }
    return chunks;
}

std::vector<Document> load_corpus(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw IoError("corpus root is not a directory: " + root.string());
    }

    std::vector<fs::path> files;
    for (fs::recursive_directory_iterator it(root, ec), end; it != end; it.increment(ec)) {
        if (ec) {
            throw IoError("cannot walk corpus directory: " + ec.message());
        }
        if (!it->is_regular_file()) {
            continue;
        }
        const auto ext = it->path().extension().string();
        if (ext == ".txt" || ext == ".md") {
            files.push_back(it->path());
        }
    }
    if (ec) {
        throw IoError("cannot walk corpus directory: " + ec.message());
    }
    std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
        return a.lexically_relative(root).generic_string() <
               b.lexically_relative(root).generic_string();
    });

    std::vector<Document> docs;
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            throw IoError("cannot read " + file.string());
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string content = buf.str();
        if (text::is_blank(content)) {
            continue;
        }
        docs.push_back({file.lexically_relative(root).generic_string(), std::move(content)});
    }
    return docs;
}

}  // namespace unweaver
