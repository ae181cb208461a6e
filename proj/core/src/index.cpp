#include "unweaver/index.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "unweaver/errors.hpp"
#include "unweaver/text.hpp"

namespace unweaver {

using nlohmann::json;

BinaryMatrix::BinaryMatrix(std::initializer_list<std::initializer_list<int>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
    bits_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw InvalidArgument("ragged binary matrix initializer");
        }
        for (const int v : r) {
            bits_.push_back(v != 0 ? 1 : 0);
        }
    }
}

std::size_t BinaryMatrix::row_sum(std::size_t r) const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < cols_; ++c) {
        n += bits_[r * cols_ + c];
    }
    return n;
}

std::size_t BinaryMatrix::col_sum(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows_; ++r) {
        n += bits_[r * cols_ + c];
    }
    return n;
}

BinaryMatrix BinaryMatrix::transposed() const {
    BinaryMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t.set(c, r, at(r, c));
        }
    }
    return t;
}

Matrix BinaryMatrix::to_matrix() const {
    Matrix m(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            m(r, c) = at(r, c) ? 1.0 : 0.0;
        }
    }
    return m;
}

void IndexConfig::validate() const {
    segment.validate();
    extractor.validate();
    embed.validate();
}

const EquivalenceClass* Index::find_class(std::string_view name) const {
    const auto key = normalize_name(name);
    for (const auto& cls : classes) {
        if (cls.normalized_name == key) {
            return &cls;
        }
    }
    return nullptr;
}

std::string normalize_name(std::string_view name) {
    constexpr std::string_view kEdgePunct = ".,;:!?\"'()";
    const std::string folded = text::fold_case(text::nfkc(name));

    std::string collapsed;
    for (const auto word : text::split_whitespace(folded)) {
        if (!collapsed.empty()) {
            collapsed += ' ';
        }
        collapsed += word;
    }

    std::string_view s = collapsed;
    for (bool changed = true; changed;) {
        const auto before = s.size();
        while (!s.empty() && kEdgePunct.find(s.front()) != std::string_view::npos) {
            s.remove_prefix(1);
        }
        while (!s.empty() && kEdgePunct.find(s.back()) != std::string_view::npos) {
            s.remove_suffix(1);
        }
        s = text::trim(s);
        changed = s.size() != before;
    }
    return std::string(s);
}

std::vector<EquivalenceClass> build_classes(std::vector<EntityMention> mentions) {
    std::stable_sort(mentions.begin(), mentions.end(),
                     [](const EntityMention& a, const EntityMention& b) {
                         return a.chunk_id < b.chunk_id;
                     });

    std::vector<EquivalenceClass> classes;
    std::unordered_map<std::string, std::size_t> by_name;
    for (auto& m : mentions) {
        auto key = normalize_name(m.name);
        if (key.empty()) {
            throw InvalidArgument("entity name '" + m.name + "' normalizes to the empty string");
        }
        auto [it, inserted] = by_name.try_emplace(key, classes.size());
        if (inserted) {
            EquivalenceClass cls;
            cls.class_id = static_cast<ClassId>(classes.size());
            cls.display_name = m.name;
            cls.normalized_name = std::move(key);
            classes.push_back(std::move(cls));
        }
        auto& cls = classes[it->second];
        if (!cls.members.empty()) {
            cls.concat_description += '\n';
        }
        cls.concat_description += m.description;
        cls.chunk_ids.insert(m.chunk_id);
        cls.members.push_back(std::move(m));
    }
    return classes;
}

IncidenceMatrix build_incidence(const std::vector<EquivalenceClass>& classes,
                                std::size_t num_chunks) {
    IncidenceMatrix c(num_chunks, classes.size());
    for (std::size_t s = 0; s < classes.size(); ++s) {
        for (const auto k : classes[s].chunk_ids) {
            if (k < 0 || static_cast<std::size_t>(k) >= num_chunks) {
                throw ChunkIdOutOfRange("class '" + classes[s].display_name + "' references chunk " +
                                        std::to_string(k) + " of " + std::to_string(num_chunks));
            }
            c.set(static_cast<std::size_t>(k), s);
        }
    }
    return c;
}

std::string embedding_text(const EquivalenceClass& cls, int shorten_threshold) {
    return truncate_description(cls.concat_description, 4 * shorten_threshold);
}

Index assemble_index(const IndexConfig& config, std::vector<Chunk> chunks,
                     std::vector<EntityMention> mentions, Gateway* gateway) {
    config.validate();
    Index index;
    index.config = config;
    index.classes = build_classes(std::move(mentions));
    if (index.classes.empty()) {
        throw IndexEmpty("no entities were extracted from the corpus");
    }
    index.incidence = build_incidence(index.classes, chunks.size());
    index.chunks = std::move(chunks);

    std::vector<std::string> texts;
    texts.reserve(index.classes.size());
    for (const auto& cls : index.classes) {
        texts.push_back(embedding_text(cls, config.extractor.shorten_threshold));
    }
    const auto vectors = embed(texts, config.embed, gateway, Phase::kIndex);
    index.embeddings = Matrix::from_columns(vectors);
    if (gateway != nullptr) {
        index.token_usage = gateway->usage();
    }
    return index;
}

Index build_index(const std::filesystem::path& corpus_dir, const IndexConfig& config,
                  Gateway* gateway) {
    config.validate();
    const auto docs = load_corpus(corpus_dir);
    if (docs.empty()) {
        throw IndexEmpty("corpus " + corpus_dir.string() + " has no non-empty .txt/.md files");
    }
    auto chunks = segment_corpus(docs, config.segment);
    auto mentions = extract_all(chunks, config.extractor, gateway);
    return assemble_index(config, std::move(chunks), std::move(mentions), gateway);
}

namespace {

const char* to_string(ExtractorBackend b) { return b == ExtractorBackend::kStub ? "stub" : "llm"; }
const char* to_string(EmbedBackend b) { return b == EmbedBackend::kStub ? "stub" : "api"; }

json config_to_json(const IndexConfig& cfg) {
    return {
        {"segment",
         {{"target_tokens", cfg.segment.target_tokens},
          {"overlap_tokens", cfg.segment.overlap_tokens}}},
        {"extractor",
         {{"backend", to_string(cfg.extractor.backend)},
          {"shorten_threshold", cfg.extractor.shorten_threshold},
          {"max_mentions_per_chunk", cfg.extractor.max_mentions_per_chunk
                                         ? json(*cfg.extractor.max_mentions_per_chunk)
                                         : json(nullptr)},
          {"max_concurrent_requests", cfg.extractor.max_concurrent_requests},
          {"llm_shortening", cfg.extractor.llm_shortening}}},
        {"embed",
         {{"backend", to_string(cfg.embed.backend)},
          {"dim", cfg.embed.dim},
          {"batch_size", cfg.embed.batch_size}}},
    };
}

IndexConfig config_from_json(const json& j) {
    IndexConfig cfg;
    const auto& seg = j.at("segment");
    cfg.segment.target_tokens = seg.at("target_tokens").get<int>();
    cfg.segment.overlap_tokens = seg.at("overlap_tokens").get<int>();

    const auto& ex = j.at("extractor");
    const auto backend = ex.at("backend").get<std::string>();
    if (backend != "stub" && backend != "llm") {
        throw IoError("unknown extractor backend '" + backend + "'");
    }
    cfg.extractor.backend = backend == "stub" ? ExtractorBackend::kStub : ExtractorBackend::kLlm;
    cfg.extractor.shorten_threshold = ex.at("shorten_threshold").get<int>();
    if (const auto& cap = ex.at("max_mentions_per_chunk"); !cap.is_null()) {
        cfg.extractor.max_mentions_per_chunk = cap.get<int>();
    }
    cfg.extractor.max_concurrent_requests = ex.at("max_concurrent_requests").get<int>();
    cfg.extractor.llm_shortening = ex.value("llm_shortening", false);

    const auto& em = j.at("embed");
    const auto embed_backend = em.at("backend").get<std::string>();
    if (embed_backend != "stub" && embed_backend != "api") {
        throw IoError("unknown embed backend '" + embed_backend + "'");
    }
    cfg.embed.backend = embed_backend == "stub" ? EmbedBackend::kStub : EmbedBackend::kApi;
    cfg.embed.dim = em.at("dim").get<int>();
    cfg.embed.batch_size = em.at("batch_size").get<int>();
    return cfg;
}

json usage_to_json(const TokenUsage& u) {
    return {{"index_prompt", u.index_prompt},         {"index_completion", u.index_completion},
            {"query_prompt", u.query_prompt},         {"query_completion", u.query_completion},
            {"index_embed", u.index_embed},           {"query_embed", u.query_embed}};
}

TokenUsage usage_from_json(const json& j) {
    TokenUsage u;
    u.index_prompt = j.at("index_prompt").get<std::int64_t>();
    u.index_completion = j.at("index_completion").get<std::int64_t>();
    u.query_prompt = j.at("query_prompt").get<std::int64_t>();
    u.query_completion = j.at("query_completion").get<std::int64_t>();
    u.index_embed = j.at("index_embed").get<std::int64_t>();
    u.query_embed = j.at("query_embed").get<std::int64_t>();
    return u;
}

}  // namespace

std::string index_to_json(const Index& index) {
    json chunks = json::array();
    for (const auto& c : index.chunks) {
        chunks.push_back({{"chunk_id", c.chunk_id},
                          {"source_id", c.source_id},
                          {"text", c.text},
                          {"first_token", c.first_token},
                          {"token_count", c.token_count}});
    }

    json classes = json::array();
    json data = json::array();
    for (std::size_t s = 0; s < index.classes.size(); ++s) {
        const auto& cls = index.classes[s];
        json members = json::array();
        for (const auto& m : cls.members) {
            members.push_back(
                {{"name", m.name}, {"description", m.description}, {"chunk_id", m.chunk_id}});
        }
        classes.push_back({{"class_id", cls.class_id},
                           {"display_name", cls.display_name},
                           {"normalized_name", cls.normalized_name},
                           {"chunk_ids", cls.chunk_ids},
                           {"concat_description", cls.concat_description},
                           {"members", std::move(members)}});
        data.push_back(index.embeddings.col(s));
    }

    const json doc = {
        {"schema_version", kIndexSchemaVersion},
        {"config", config_to_json(index.config)},
        {"token_usage", usage_to_json(index.token_usage)},
        {"chunks", std::move(chunks)},
        {"classes", std::move(classes)},
        {"embeddings", {{"dim", index.dim()}, {"data", std::move(data)}}},
    };
    return doc.dump();
}

Index index_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("index file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("schema_version") ||
        !doc["schema_version"].is_number_integer()) {
        throw IoError("index file has no schema_version");
    }
    const int version = doc["schema_version"].get<int>();
    if (version != kIndexSchemaVersion) {
        throw SchemaVersionMismatch("index schema_version " + std::to_string(version) +
                                    " is not supported (expected " +
                                    std::to_string(kIndexSchemaVersion) + ")");
    }

    Index index;
    try {
        index.config = config_from_json(doc.at("config"));
        index.token_usage = usage_from_json(doc.at("token_usage"));

        for (const auto& c : doc.at("chunks")) {
            index.chunks.push_back(Chunk{
                .chunk_id = c.at("chunk_id").get<ChunkId>(),
                .source_id = c.at("source_id").get<std::string>(),
                .text = c.at("text").get<std::string>(),
                .first_token = c.at("first_token").get<int>(),
                .token_count = c.at("token_count").get<int>(),
            });
        }
        for (std::size_t k = 0; k < index.chunks.size(); ++k) {
            if (index.chunks[k].chunk_id != static_cast<ChunkId>(k)) {
                throw IoError("chunk ids are not dense and ordered");
            }
        }

        for (const auto& c : doc.at("classes")) {
            EquivalenceClass cls;
            cls.class_id = c.at("class_id").get<ClassId>();
            cls.display_name = c.at("display_name").get<std::string>();
            cls.normalized_name = c.at("normalized_name").get<std::string>();
            cls.chunk_ids = c.at("chunk_ids").get<std::set<ChunkId>>();
            cls.concat_description = c.at("concat_description").get<std::string>();
            for (const auto& m : c.at("members")) {
                cls.members.push_back({m.at("name").get<std::string>(),
                                       m.at("description").get<std::string>(),
                                       m.at("chunk_id").get<ChunkId>()});
            }
            if (cls.class_id != static_cast<ClassId>(index.classes.size())) {
                throw IoError("class ids are not dense and ordered");
            }
            index.classes.push_back(std::move(cls));
        }

        const auto& emb = doc.at("embeddings");
        const auto dim = emb.at("dim").get<std::size_t>();
        const auto columns = emb.at("data").get<std::vector<Vector>>();
        if (columns.size() != index.classes.size()) {
            throw IoError("embedding count does not match class count");
        }
        for (const auto& col : columns) {
            if (col.size() != dim) {
                throw IoError("embedding has wrong dimension");
            }
        }
        index.embeddings = columns.empty() ? Matrix(dim, 0) : Matrix::from_columns(columns);
        index.incidence = build_incidence(index.classes, index.chunks.size());
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed index file: ") + e.what());
    } catch (const ChunkIdOutOfRange& e) {
        throw IoError(std::string("malformed index file: ") + e.what());
    }
    return index;
}

void save_index(const Index& index, const std::filesystem::path& path) {
    const auto payload = index_to_json(index);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << payload << '\n';
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

Index load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open index " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return index_from_json(buf.str());
}

}  // namespace unweaver
