#include "unweaver/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include <nlohmann/json.hpp>

#include "unweaver/errors.hpp"

namespace unweaver {

using nlohmann::json;

TokenUsage& TokenUsage::operator+=(const TokenUsage& other) {
    index_prompt += other.index_prompt;
    index_completion += other.index_completion;
    query_prompt += other.query_prompt;
    query_completion += other.query_completion;
    index_embed += other.index_embed;
    query_embed += other.query_embed;
    return *this;
}

GatewayConfig GatewayConfig::from_env() {
    GatewayConfig cfg;
    if (const char* url = std::getenv("UNWEAVER_BASE_URL")) {
        cfg.base_url = url;
    }
    if (const char* key = std::getenv("UNWEAVER_API_KEY")) {
        cfg.api_key = key;
    }
    return cfg;
}

std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

struct Gateway::Transport {
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // "" or "/something"
    std::counting_semaphore<1024> in_flight;

    explicit Transport(const GatewayConfig& cfg)
        : in_flight(std::clamp(cfg.max_in_flight, 1, 1024)) {
        std::string url = cfg.base_url;
        while (!url.empty() && url.back() == '/') {
            url.pop_back();
        }
        const auto scheme = url.find("://");
        const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (slash == std::string::npos) {
            origin = url;
        } else {
            origin = url.substr(0, slash);
            path_prefix = url.substr(slash);
        }
    }
};

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)), transport_(std::make_unique<Transport>(config_)) {
    if (config_.base_url.empty()) {
        throw InvalidArgument("gateway base_url is empty (set UNWEAVER_BASE_URL)");
    }
    if (config_.max_attempts < 1) {
        throw InvalidArgument("gateway max_attempts must be >= 1");
    }
}

Gateway::~Gateway() = default;

std::string Gateway::post_json(const std::string& path, const std::string& body) {
    const std::string target = transport_->path_prefix + path;
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    transport_->in_flight.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{transport_->in_flight};

    int last_status = 0;
    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        httplib::Client client(transport_->origin);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);

        auto res = client.Post(target, headers, body, "application/json");
        bool retryable = true;
        if (!res) {
            last_status = 0;
            last_error = httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
            return res->body;
        } else {
            last_status = res->status;
            last_error = res->body.substr(0, 512);
            retryable = res->status == 429 || res->status >= 500;
        }
        if (!retryable || attempt == config_.max_attempts) {
            break;
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
    throw BackendError("POST " + target + " failed (status " + std::to_string(last_status) +
                           "): " + last_error,
                       last_status);
}

void Gateway::record(Phase phase, std::int64_t prompt, std::int64_t completion,
                     std::int64_t embed) {
    std::lock_guard lock(usage_mutex_);
    if (phase == Phase::kIndex) {
        usage_.index_prompt += prompt;
        usage_.index_completion += completion;
        usage_.index_embed += embed;
    } else {
        usage_.query_prompt += prompt;
        usage_.query_completion += completion;
        usage_.query_embed += embed;
    }
}

TokenUsage Gateway::usage() const {
    std::lock_guard lock(usage_mutex_);
    return usage_;
}

ChatResponse Gateway::chat(const ChatRequest& request, Phase phase) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        if (m.role != "system" && m.role != "user") {
            throw InvalidArgument("chat message role must be system or user, got " + m.role);
        }
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    const json body = {
        {"model", request.model.empty() ? config_.chat_model : request.model},
        {"messages", std::move(messages)},
        {"temperature", request.temperature},
    };
    const std::string raw = post_json("/v1/chat/completions", body.dump());

    ChatResponse out;
    try {
        const json reply = json::parse(raw);
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        out.content = content.is_string() ? content.get<std::string>() : std::string{};
        const auto usage = reply.find("usage");
        if (usage != reply.end() && usage->is_object() && usage->contains("prompt_tokens")) {
            out.prompt_tokens = usage->at("prompt_tokens").get<std::int64_t>();
            out.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
        } else {
            std::int64_t prompt = 0;
            for (const auto& m : request.messages) {
                prompt += estimate_tokens(m.content);
            }
            out.prompt_tokens = prompt;
            out.completion_tokens = estimate_tokens(out.content);
            out.estimated = true;
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("unparseable chat completion response: ") + e.what(), 200);
    }
    record(phase, out.prompt_tokens, out.completion_tokens, 0);
    return out;
}

EmbedResponse Gateway::embed(const EmbedRequest& request, Phase phase) {
    const json body = {
        {"model", request.model.empty() ? config_.embed_model : request.model},
        {"input", request.input},
    };
    const std::string raw = post_json("/v1/embeddings", body.dump());

    EmbedResponse out;
    try {
        const json reply = json::parse(raw);
        const auto& data = reply.at("data");
        out.vectors.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto pos = data[i].value("index", i);
            if (pos >= data.size()) {
                throw BackendError("embedding index out of range", 200);
            }
            out.vectors[pos] = data[i].at("embedding").get<std::vector<double>>();
        }
        const auto usage = reply.find("usage");
        if (usage != reply.end() && usage->is_object() &&
            (usage->contains("prompt_tokens") || usage->contains("total_tokens"))) {
            out.tokens = usage->contains("prompt_tokens")
                             ? usage->at("prompt_tokens").get<std::int64_t>()
                             : usage->at("total_tokens").get<std::int64_t>();
        } else {
            for (const auto& t : request.input) {
                out.tokens += estimate_tokens(t);
            }
            out.estimated = true;
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("unparseable embeddings response: ") + e.what(), 200);
    }
    if (out.vectors.size() != request.input.size()) {
        throw BackendError("embeddings response has " + std::to_string(out.vectors.size()) +
                               " vectors for " + std::to_string(request.input.size()) + " inputs",
                           200);
    }
    record(phase, 0, 0, out.tokens);
    return out;
}

const std::string_view kAnswerSystemTemplate =
    "You are a question answering system.\n"
    "Please make sure that the answer is correct and complete. \n"
    "At the same time avoid redundancy and irrelevant information.\n"
    "Please try to answer the question in Single Sentence.\n"
    "\n"
    "Do so based on the following context:\n"
    "\n"
    "{context}";

std::vector<ChatMessage> answer_prompt(const std::vector<Chunk>& context,
                                       std::string_view question) {
    if (context.empty()) {
        throw InvalidArgument("answer_prompt needs at least one context chunk");
    }
    std::string joined;
    for (std::size_t i = 0; i < context.size(); ++i) {
        if (i > 0) {
            joined += kContextSeparator;
        }
        joined += context[i].text;
    }
    std::string system(kAnswerSystemTemplate);
    const auto slot = system.find("{context}");
    system.replace(slot, std::string_view("{context}").size(), joined);
    return {{"system", std::move(system)}, {"user", std::string(question)}};
}

}  // namespace unweaver
