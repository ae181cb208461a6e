#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "unweaver/corpus.hpp"

namespace unweaver {

enum class Phase { kIndex, kQuery };

/// Token counters split by pipeline phase.
struct TokenUsage {
    std::int64_t index_prompt = 0;
    std::int64_t index_completion = 0;
    std::int64_t query_prompt = 0;
    std::int64_t query_completion = 0;
    std::int64_t index_embed = 0;
    std::int64_t query_embed = 0;

    TokenUsage& operator+=(const TokenUsage& other);
    bool operator==(const TokenUsage&) const = default;
};

struct ChatMessage {
    std::string role;  // "system" or "user"
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
};

struct ChatResponse {
    std::string content;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool estimated = false;  // usage absent from the provider response
};

struct EmbedRequest {
    std::string model;
    std::vector<std::string> input;
};

struct EmbedResponse {
    std::vector<std::vector<double>> vectors;
    std::int64_t tokens = 0;
    bool estimated = false;
};

struct GatewayConfig {
    std::string base_url;  // e.g. "https://api.openai.com" (without /v1)
    std::string api_key;
    std::string chat_model = "gpt-4o-mini";
    std::string embed_model = "text-embedding-3-small";
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    int max_in_flight = 4;
    std::chrono::seconds timeout{120};

    /// Reads UNWEAVER_BASE_URL and UNWEAVER_API_KEY on top of the defaults.
    static GatewayConfig from_env();
};

/// ceil(chars / 4), used when a provider omits usage counts.
std::int64_t estimate_tokens(std::string_view text);

/// OpenAI-compatible client for /v1/chat/completions and /v1/embeddings.
/// Shareable across threads; every call adds to exactly one phase bucket.
class Gateway {
public:
    explicit Gateway(GatewayConfig config);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    ChatResponse chat(const ChatRequest& request, Phase phase);
    EmbedResponse embed(const EmbedRequest& request, Phase phase);

    TokenUsage usage() const;
    const GatewayConfig& config() const noexcept { return config_; }

private:
    struct Transport;

    std::string post_json(const std::string& path, const std::string& body);
    void record(Phase phase, std::int64_t prompt, std::int64_t completion,
                std::int64_t embed);

    GatewayConfig config_;
    std::unique_ptr<Transport> transport_;
    mutable std::mutex usage_mutex_;
    TokenUsage usage_;
};

/// System prompt for answer generation; `{context}` is substituted.
extern const std::string_view kAnswerSystemTemplate;

/// Separator placed between context chunks.
inline constexpr std::string_view kContextSeparator = "\n\n---\n\n";

/// Builds [system, user] messages for answering `question` from `context`
/// (chunks in elected order). Throws InvalidArgument on an empty context.
std::vector<ChatMessage> answer_prompt(const std::vector<Chunk>& context,
                                       std::string_view question);

}  // namespace unweaver
