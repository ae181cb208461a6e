#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>

#include <nlohmann/json.hpp>

#include "unweaver/alignment.hpp"
#include "unweaver/errors.hpp"
#include "unweaver/extraction.hpp"
#include "unweaver/gateway.hpp"
#include "unweaver/index.hpp"
#include "unweaver/retrieval.hpp"

namespace unweaver::cli {
namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BackendChoice { kStub, kApi };

struct CliConfig {
    std::string index_path = "unweaver_index.json";
    BackendChoice backend = BackendChoice::kStub;
    IndexConfig index;
    SimilarityConfig sim;
    ElectionConfig election;
    std::optional<AlignMethod> align;  // unset: election path
    int k_prime = 3;
    double budget = 1.0;
    std::size_t pool = 0;
    GatewayConfig gateway;
};

BackendChoice parse_backend(const std::string& s) {
    if (s == "stub") {
        return BackendChoice::kStub;
    }
    if (s == "api" || s == "llm") {
        return BackendChoice::kApi;
    }
    throw UsageError("unknown backend '" + s + "' (expected stub or api)");
}

ElectionRule parse_rule(const std::string& s) {
    if (s == "av") return ElectionRule::kAv;
    if (s == "pav" || s == "pav_greedy") return ElectionRule::kPavGreedy;
    if (s == "cc" || s == "cc_greedy") return ElectionRule::kCcGreedy;
    if (s == "exact_pav") return ElectionRule::kExactPav;
    if (s == "exact_cc") return ElectionRule::kExactCc;
    throw UsageError("unknown election rule '" + s + "'");
}

const char* rule_name(ElectionRule r) {
    switch (r) {
        case ElectionRule::kAv: return "av";
        case ElectionRule::kPavGreedy: return "pav_greedy";
        case ElectionRule::kCcGreedy: return "cc_greedy";
        case ElectionRule::kExactPav: return "exact_pav";
        case ElectionRule::kExactCc: return "exact_cc";
    }
    return "?";
}

Metric parse_metric(const std::string& s) {
    if (s == "cosine") return Metric::kCosine;
    if (s == "euclidean") return Metric::kEuclidean;
    throw UsageError("unknown metric '" + s + "'");
}

AlignMethod parse_align(const std::string& s) {
    if (s == "none") return AlignMethod::kNone;
    if (s == "utility") return AlignMethod::kUtility;
    if (s == "cls") return AlignMethod::kCls;
    throw UsageError("unknown alignment method '" + s + "'");
}

const char* align_name(AlignMethod m) {
    switch (m) {
        case AlignMethod::kNone: return "none";
        case AlignMethod::kUtility: return "utility";
        case AlignMethod::kCls: return "cls";
    }
    return "?";
}

json usage_json(const TokenUsage& u) {
    return {{"index_prompt", u.index_prompt},       {"index_completion", u.index_completion},
            {"query_prompt", u.query_prompt},       {"query_completion", u.query_completion},
            {"index_embed", u.index_embed},         {"query_embed", u.query_embed}};
}

template <typename T>
void read_if(const json& obj, const char* key, T& target) {
    if (const auto it = obj.find(key); it != obj.end() && !it->is_null()) {
        target = it->get<T>();
    }
}

void apply_config_file(CliConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot read config file " + path);
    }
    json doc;
    try {
        doc = json::parse(in);
        std::string s;
        read_if(doc, "index_path", cfg.index_path);
        if (s.clear(), read_if(doc, "backend", s), !s.empty()) {
            cfg.backend = parse_backend(s);
        }
        if (const auto it = doc.find("segment"); it != doc.end()) {
            read_if(*it, "target_tokens", cfg.index.segment.target_tokens);
            read_if(*it, "overlap_tokens", cfg.index.segment.overlap_tokens);
        }
        if (const auto it = doc.find("extractor"); it != doc.end()) {
            read_if(*it, "shorten_threshold", cfg.index.extractor.shorten_threshold);
            read_if(*it, "max_concurrent_requests", cfg.index.extractor.max_concurrent_requests);
            read_if(*it, "llm_shortening", cfg.index.extractor.llm_shortening);
            if (it->contains("max_mentions_per_chunk") &&
                !(*it)["max_mentions_per_chunk"].is_null()) {
                cfg.index.extractor.max_mentions_per_chunk =
                    (*it)["max_mentions_per_chunk"].get<int>();
            }
        }
        if (const auto it = doc.find("embed"); it != doc.end()) {
            read_if(*it, "dim", cfg.index.embed.dim);
            read_if(*it, "batch_size", cfg.index.embed.batch_size);
        }
        if (const auto it = doc.find("retrieval"); it != doc.end()) {
            read_if(*it, "k0", cfg.sim.k0);
            read_if(*it, "r", cfg.election.r);
            if (s.clear(), read_if(*it, "rule", s), !s.empty()) {
                cfg.election.rule = parse_rule(s);
            }
            if (s.clear(), read_if(*it, "metric", s), !s.empty()) {
                cfg.sim.metric = parse_metric(s);
            }
        }
        if (const auto it = doc.find("alignment"); it != doc.end()) {
            if (s.clear(), read_if(*it, "method", s), !s.empty()) {
                cfg.align = parse_align(s);
            }
            read_if(*it, "k_prime", cfg.k_prime);
            read_if(*it, "f", cfg.budget);
            read_if(*it, "pool", cfg.pool);
        }
        if (const auto it = doc.find("gateway"); it != doc.end()) {
            read_if(*it, "base_url", cfg.gateway.base_url);
            read_if(*it, "chat_model", cfg.gateway.chat_model);
            read_if(*it, "embed_model", cfg.gateway.embed_model);
            read_if(*it, "max_attempts", cfg.gateway.max_attempts);
            read_if(*it, "max_in_flight", cfg.gateway.max_in_flight);
        }
    } catch (const json::exception& e) {
        throw UsageError("invalid config file " + path + ": " + e.what());
    }
}

void apply_env(CliConfig& cfg) {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (v == nullptr || *v == '\0') {
            return std::nullopt;
        }
        return std::string(v);
    };
    if (auto v = env("UNWEAVER_INDEX_PATH")) cfg.index_path = *v;
    if (auto v = env("UNWEAVER_BACKEND")) cfg.backend = parse_backend(*v);
    if (auto v = env("UNWEAVER_BASE_URL")) cfg.gateway.base_url = *v;
    if (auto v = env("UNWEAVER_API_KEY")) cfg.gateway.api_key = *v;
    if (auto v = env("UNWEAVER_CHAT_MODEL")) cfg.gateway.chat_model = *v;
    if (auto v = env("UNWEAVER_EMBED_MODEL")) cfg.gateway.embed_model = *v;
}

// Raw flag values; applied on top of file and environment only when given.
struct Flags {
    std::string config_path;
    std::string index_path;
    std::string backend;

    std::string corpus_dir;
    int target_tokens = 0;
    int overlap_tokens = 0;
    int dim = 0;
    int shorten_threshold = 0;
    int max_mentions = 0;
    int max_concurrent = 0;
    bool llm_shorten = false;

    std::string question;
    int k0 = 0;
    int r = 0;
    std::string rule;
    std::string metric;
    std::string align;
    int k_prime = 0;
    double f = 0.0;
    std::size_t pool = 0;

    std::string entity;
};

struct FlagHandles {
    CLI::Option* config = nullptr;
    CLI::Option* index_path = nullptr;
    CLI::Option* backend = nullptr;
    CLI::Option* target_tokens = nullptr;
    CLI::Option* overlap_tokens = nullptr;
    CLI::Option* dim = nullptr;
    CLI::Option* shorten_threshold = nullptr;
    CLI::Option* max_mentions = nullptr;
    CLI::Option* max_concurrent = nullptr;
    CLI::Option* llm_shorten = nullptr;
    std::vector<CLI::Option*> k0, r, rule, metric, align, k_prime, f, pool;
};

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

bool any_given(const std::vector<CLI::Option*>& opts) {
    return std::any_of(opts.begin(), opts.end(), [](const CLI::Option* o) { return given(o); });
}

CliConfig resolve(const Flags& flags, const FlagHandles& h) {
    CliConfig cfg;
    if (given(h.config)) {
        apply_config_file(cfg, flags.config_path);
    }
    apply_env(cfg);

    if (given(h.index_path)) cfg.index_path = flags.index_path;
    if (given(h.backend)) cfg.backend = parse_backend(flags.backend);
    if (given(h.target_tokens)) cfg.index.segment.target_tokens = flags.target_tokens;
    if (given(h.overlap_tokens)) cfg.index.segment.overlap_tokens = flags.overlap_tokens;
    if (given(h.dim)) cfg.index.embed.dim = flags.dim;
    if (given(h.shorten_threshold)) cfg.index.extractor.shorten_threshold = flags.shorten_threshold;
    if (given(h.max_mentions)) cfg.index.extractor.max_mentions_per_chunk = flags.max_mentions;
    if (given(h.max_concurrent)) cfg.index.extractor.max_concurrent_requests = flags.max_concurrent;
    if (given(h.llm_shorten)) cfg.index.extractor.llm_shortening = flags.llm_shorten;
    if (any_given(h.k0)) cfg.sim.k0 = flags.k0;
    if (any_given(h.r)) cfg.election.r = flags.r;
    if (any_given(h.rule)) cfg.election.rule = parse_rule(flags.rule);
    if (any_given(h.metric)) cfg.sim.metric = parse_metric(flags.metric);
    if (any_given(h.align)) cfg.align = parse_align(flags.align);
    if (any_given(h.k_prime)) cfg.k_prime = flags.k_prime;
    if (any_given(h.f)) cfg.budget = flags.f;
    if (any_given(h.pool)) cfg.pool = flags.pool;

    const auto backend = cfg.backend == BackendChoice::kStub;
    cfg.index.extractor.backend = backend ? ExtractorBackend::kStub : ExtractorBackend::kLlm;
    cfg.index.embed.backend = backend ? EmbedBackend::kStub : EmbedBackend::kApi;

    try {
        cfg.index.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (cfg.sim.k0 < 1) throw UsageError("--k0 must be >= 1");
    if (cfg.election.r < 1) throw UsageError("--r must be >= 1");
    if (cfg.k_prime < 1) throw UsageError("--k-prime must be >= 1");
    if (!(cfg.budget > 0.0)) throw UsageError("--f must be > 0");
    if (cfg.index_path.empty()) throw UsageError("--index-path must not be empty");
    return cfg;
}

std::unique_ptr<Gateway> make_gateway(const CliConfig& cfg) {
    if (cfg.gateway.base_url.empty()) {
        throw UsageError("the api backend needs UNWEAVER_BASE_URL (or gateway.base_url)");
    }
    return std::make_unique<Gateway>(cfg.gateway);
}

json retrieval_json(const Index& index, const RetrievalResult& result, const CliConfig& cfg,
                    const std::string& question) {
    json selected = json::array();
    for (const auto& sc : result.selected_classes) {
        selected.push_back({{"class_id", sc.class_id},
                            {"name", index.classes[static_cast<std::size_t>(sc.class_id)].display_name},
                            {"score", sc.score}});
    }
    json line = {
        {"type", "retrieval"},
        {"question", question},
        {"status", result.status == RetrievalStatus::kOk ? "ok" : "no_candidates"},
        {"mode", cfg.align ? "aligned" : "election"},
        {"elected_chunks", result.elected_chunks},
        {"rule_scores", result.rule_scores},
        {"padded", result.padded},
        {"selected_classes", std::move(selected)},
        {"warnings", result.warnings},
    };
    if (cfg.align) {
        line["align"] = align_name(*cfg.align);
        line["k_prime"] = cfg.k_prime;
    } else {
        line["rule"] = rule_name(cfg.election.rule);
        line["r"] = cfg.election.r;
        line["k0"] = cfg.sim.k0;
        line["metric"] = cfg.sim.metric == Metric::kCosine ? "cosine" : "euclidean";
    }
    return line;
}

RetrievalResult run_retrieval(const Index& index, const CliConfig& cfg,
                              const std::string& question, Gateway* gateway) {
    if (cfg.align) {
        return aligned_retrieve(index, question, *cfg.align, BudgetPolicy{cfg.budget},
                                cfg.k_prime, gateway, cfg.pool);
    }
    return retrieve(index, question, cfg.sim, cfg.election, gateway);
}

std::string first_sentence(const std::string& text) {
    // Skips headings and other fragments without terminal punctuation when possible.
    const auto sentences = split_sentences(text);
    for (const auto s : sentences) {
        if (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?')) {
            return std::string(s);
        }
    }
    return sentences.empty() ? std::string{} : std::string(sentences.front());
}

int cmd_index(const CliConfig& cfg, const std::string& corpus_dir, std::ostream& out,
              std::ostream& err) {
    std::unique_ptr<Gateway> gateway;
    if (cfg.backend == BackendChoice::kApi) {
        gateway = make_gateway(cfg);
    }
    const auto index = build_index(corpus_dir, cfg.index, gateway.get());
    save_index(index, cfg.index_path);

    std::size_t mentions = 0;
    for (const auto& cls : index.classes) {
        mentions += cls.members.size();
    }
    err << "indexed " << index.num_chunks() << " chunks, " << index.num_classes()
        << " classes into " << cfg.index_path << "\n";
    out << json{{"type", "index"},
                {"index_path", cfg.index_path},
                {"chunks", index.num_chunks()},
                {"classes", index.num_classes()},
                {"mentions", mentions},
                {"dim", index.dim()},
                {"token_usage", usage_json(index.token_usage)}}
               .dump()
        << "\n";
    return kExitOk;
}

int cmd_query(const CliConfig& cfg, const std::string& question, bool answer,
              std::ostream& out, std::ostream& err) {
    const auto index = load_index(cfg.index_path);
    std::unique_ptr<Gateway> gateway;
    const bool api_embed = index.config.embed.backend == EmbedBackend::kApi;
    if (api_embed || (answer && cfg.backend == BackendChoice::kApi)) {
        gateway = make_gateway(cfg);
    }

    const auto result = run_retrieval(index, cfg, question, gateway.get());
    for (const auto& w : result.warnings) {
        err << "warning: " << w << "\n";
    }
    out << retrieval_json(index, result, cfg, question).dump() << "\n";

    std::vector<Chunk> context;
    for (std::size_t i = 0; i < result.elected_chunks.size(); ++i) {
        const auto& chunk = index.chunks[static_cast<std::size_t>(result.elected_chunks[i])];
        context.push_back(chunk);
        if (!answer) {
            out << json{{"type", "chunk"},
                        {"rank", i},
                        {"chunk_id", chunk.chunk_id},
                        {"source_id", chunk.source_id},
                        {"text", chunk.text}}
                       .dump()
                << "\n";
        }
    }
    if (!answer) {
        return kExitOk;
    }

    std::string reply;
    if (context.empty()) {
        err << "warning: no context retrieved; nothing to answer from\n";
    } else if (cfg.backend == BackendChoice::kStub) {
        reply = first_sentence(context.front().text);
    } else {
        ChatRequest request;
        request.model = cfg.gateway.chat_model;
        request.messages = answer_prompt(context, question);
        reply = gateway->chat(request, Phase::kQuery).content;
    }
    out << json{{"type", "answer"},
                {"answer", reply},
                {"chunk_ids", result.elected_chunks},
                {"token_usage", usage_json(gateway ? gateway->usage() : TokenUsage{})}}
               .dump()
        << "\n";
    return kExitOk;
}

int cmd_inspect(const CliConfig& cfg, const std::string& entity, std::ostream& out,
                std::ostream& err) {
    const auto index = load_index(cfg.index_path);
    const auto* cls = index.find_class(entity);
    if (cls == nullptr) {
        err << "error: no entity named '" << entity << "' in " << cfg.index_path << "\n";
        return kExitRuntimeError;
    }
    json members = json::array();
    for (const auto& m : cls->members) {
        members.push_back(
            {{"name", m.name}, {"description", m.description}, {"chunk_id", m.chunk_id}});
    }
    out << json{{"type", "class"},
                {"class_id", cls->class_id},
                {"display_name", cls->display_name},
                {"normalized_name", cls->normalized_name},
                {"chunk_ids", cls->chunk_ids},
                {"concat_description", cls->concat_description},
                {"members", std::move(members)}}
               .dump()
        << "\n";
    return kExitOk;
}

int cmd_stats(const CliConfig& cfg, std::ostream& out) {
    const auto index = load_index(cfg.index_path);
    std::size_t mentions = 0;
    std::size_t nonzeros = 0;
    std::size_t multi_chunk = 0;
    for (const auto& cls : index.classes) {
        mentions += cls.members.size();
        nonzeros += cls.chunk_ids.size();
        multi_chunk += cls.chunk_ids.size() > 1 ? 1 : 0;
    }
    out << json{{"type", "stats"},
                {"index_path", cfg.index_path},
                {"schema_version", kIndexSchemaVersion},
                {"chunks", index.num_chunks()},
                {"classes", index.num_classes()},
                {"mentions", mentions},
                {"dim", index.dim()},
                {"incidence_nonzeros", nonzeros},
                {"multi_chunk_classes", multi_chunk},
                {"extractor", index.config.extractor.backend == ExtractorBackend::kStub ? "stub"
                                                                                        : "llm"},
                {"embedder",
                 index.config.embed.backend == EmbedBackend::kStub ? "stub" : "api"},
                {"token_usage", usage_json(index.token_usage)}}
               .dump()
        << "\n";
    return kExitOk;
}

void add_query_flags(CLI::App* cmd, Flags& flags, FlagHandles& h) {
    cmd->add_option("question", flags.question, "Question text")->required();
    h.k0.push_back(cmd->add_option("--k0", flags.k0, "Classes kept as voters (default 10)"));
    h.r.push_back(cmd->add_option("--r", flags.r, "Chunks to elect (default 5)"));
    h.rule.push_back(cmd->add_option(
        "--rule", flags.rule, "av | pav_greedy | cc_greedy | exact_pav | exact_cc (default av)"));
    h.metric.push_back(
        cmd->add_option("--metric", flags.metric, "cosine | euclidean (default cosine)"));
    h.align.push_back(cmd->add_option(
        "--align", flags.align, "none | utility | cls: use aligned TopK retrieval instead"));
    h.k_prime.push_back(
        cmd->add_option("--k-prime", flags.k_prime, "Classes kept by aligned retrieval (default 3)"));
    h.f.push_back(cmd->add_option("--f", flags.f, "Per-chunk budget for alignment (default 1)"));
    h.pool.push_back(cmd->add_option(
        "--pool", flags.pool, "Alignment candidate pool size, 0 = all classes (default 0)"));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"unweaver: entity-centric retrieval over a document corpus"};
    app.name("unweaver");
    app.require_subcommand(1);
    app.fallthrough();

    Flags flags;
    FlagHandles h;
    h.config = app.add_option("--config", flags.config_path, "JSON config file");
    h.index_path = app.add_option("--index-path", flags.index_path,
                                  "Index file (default unweaver_index.json)");
    h.backend = app.add_option("--backend", flags.backend, "stub | api (default stub)");

    auto* index_cmd = app.add_subcommand("index", "Build and save an index from a corpus directory");
    index_cmd->add_option("corpus_dir", flags.corpus_dir, "Directory of .txt/.md files")->required();
    h.target_tokens = index_cmd->add_option("--target-tokens", flags.target_tokens, "Chunk size");
    h.overlap_tokens = index_cmd->add_option("--overlap-tokens", flags.overlap_tokens, "Chunk overlap");
    h.dim = index_cmd->add_option("--dim", flags.dim, "Embedding dimension");
    h.shorten_threshold =
        index_cmd->add_option("--shorten-threshold", flags.shorten_threshold, "Description limit");
    h.max_mentions =
        index_cmd->add_option("--max-mentions", flags.max_mentions, "Entities kept per chunk");
    h.max_concurrent = index_cmd->add_option("--max-concurrent-requests", flags.max_concurrent,
                                             "Parallel extraction requests");
    h.llm_shorten = index_cmd->add_flag("--llm-shorten", flags.llm_shorten,
                                        "Shorten long descriptions with the chat model");

    auto* query_cmd = app.add_subcommand("query", "Retrieve chunks for a question");
    add_query_flags(query_cmd, flags, h);
    auto* answer_cmd = app.add_subcommand("answer", "Retrieve chunks and answer a question");
    add_query_flags(answer_cmd, flags, h);
    auto* inspect_cmd = app.add_subcommand("inspect", "Show the equivalence class of an entity");
    inspect_cmd->add_option("entity_name", flags.entity, "Entity name")->required();
    auto* stats_cmd = app.add_subcommand("stats", "Summarize an index");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    CliConfig cfg;
    try {
        cfg = resolve(flags, h);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (index_cmd->parsed()) return cmd_index(cfg, flags.corpus_dir, out, err);
        if (query_cmd->parsed()) return cmd_query(cfg, flags.question, false, out, err);
        if (answer_cmd->parsed()) return cmd_query(cfg, flags.question, true, out, err);
        if (inspect_cmd->parsed()) return cmd_inspect(cfg, flags.entity, out, err);
        if (stats_cmd->parsed()) return cmd_stats(cfg, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return kExitRuntimeError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
    return kExitUsage;
}

}  // namespace unweaver::cli
