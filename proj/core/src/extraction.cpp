#include "unweaver/extraction.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "unweaver/errors.hpp"
#include "unweaver/gateway.hpp"
#include "unweaver/index.hpp"
#include "unweaver/text.hpp"

namespace unweaver {
namespace {

using nlohmann::json;

constexpr std::string_view kEllipsis = "…";

// Capitalized function words that do not start an entity when they open a
// sentence.
const std::unordered_set<std::string_view> kSentenceInitialStopwords = {
    "The", "A", "An", "This", "That", "These", "Those", "It", "Its", "In", "On",
    "At", "By", "For", "From", "With", "And", "But", "Or", "If", "When", "While",
    "He", "She", "They", "We", "You", "His", "Her", "Their", "Our", "There", "Here",
    "As", "After", "Before", "Of", "To", "Is", "Was", "Are", "Were", "Then", "Also",
    "However", "Although", "Because", "Since", "During", "Each", "Every", "Some",
    "Many", "Most", "All", "No", "Not", "One", "Which", "What", "Who", "Where",
    "How", "Why", "Both", "Such", "Thus", "Later", "Today", "Yet", "So", "Its",
    "My", "Your", "Any", "Other", "Another", "Over", "Under", "About", "Into",
};

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) != 0 || u >= 0x80 || c == '_';
}

constexpr std::string_view kLeadingPunct = "\"'([{";
constexpr std::string_view kTrailingPunct = ".,;:!?\"')]}";

// Strips outer ASCII punctuation from a token; reports which sides had any.
struct StrippedWord {
    std::string_view core;
    bool had_leading = false;
    bool had_trailing = false;
};

StrippedWord strip_word(std::string_view token) {
    StrippedWord w;
    while (!token.empty() && kLeadingPunct.find(token.front()) != std::string_view::npos) {
        token.remove_prefix(1);
        w.had_leading = true;
    }
    while (!token.empty() && kTrailingPunct.find(token.back()) != std::string_view::npos) {
        token.remove_suffix(1);
        w.had_trailing = true;
    }
    for (std::string_view possessive : {"'s", "’s"}) {
        if (token.size() > possessive.size() && token.ends_with(possessive)) {
            token.remove_suffix(possessive.size());
            w.had_trailing = true;
        }
    }
    w.core = token;
    return w;
}

bool contains_whole_word(std::string_view haystack, std::string_view needle) {
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + 1)) {
        const bool left_ok = pos == 0 || !is_word_byte(haystack[pos - 1]);
        const auto after = pos + needle.size();
        const bool right_ok = after >= haystack.size() || !is_word_byte(haystack[after]);
        if (left_ok && right_ok) {
            return true;
        }
    }
    return false;
}

std::string strip_code_fence(std::string_view s) {
    s = text::trim(s);
    if (s.starts_with("```")) {
        const auto nl = s.find('\n');
        s = nl == std::string_view::npos ? std::string_view{} : s.substr(nl + 1);
        const auto close = s.rfind("```");
        if (close != std::string_view::npos) {
            s = s.substr(0, close);
        }
    }
    return std::string(s);
}

std::string clip_name(std::string_view name) {
    return std::string(text::prefix(text::trim(name), kMaxNameLength));
}

std::vector<EntityMention> extract_llm(const Chunk& chunk, Gateway& gateway) {
    ChatRequest request;
    request.model = gateway.config().chat_model;
    request.messages = {{"system", "You extract named entities from text and reply with JSON only."},
                        {"user", extraction_prompt(chunk.text)}};
    const auto first = gateway.chat(request, Phase::kIndex);
    try {
        return parse_extraction_output(first.content, chunk.chunk_id);
    } catch (const MalformedOutput&) {
    }

    request.messages.push_back(
        {"user", "Your previous reply could not be parsed as a JSON array:\n\n" + first.content +
                     "\n\nReply again with only the JSON array of objects with string fields "
                     "\"name\" and \"description\"."});
    const auto repaired = gateway.chat(request, Phase::kIndex);
    return parse_extraction_output(repaired.content, chunk.chunk_id);
}

}  // namespace

void ExtractorConfig::validate() const {
    if (shorten_threshold < 64) {
        throw InvalidArgument("shorten_threshold must be >= 64");
    }
    if (max_mentions_per_chunk && *max_mentions_per_chunk < 1) {
        throw InvalidArgument("max_mentions_per_chunk must be >= 1 when set");
    }
    if (max_concurrent_requests < 1) {
        throw InvalidArgument("max_concurrent_requests must be >= 1");
    }
}

std::vector<std::string_view> split_sentences(std::string_view text) {
    std::vector<std::string_view> out;
    auto emit = [&](std::size_t begin, std::size_t end) {
        const auto s = text::trim(text.substr(begin, end - begin));
        if (!s.empty()) {
            out.push_back(s);
        }
    };
    std::size_t begin = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == text.size() || is_ascii_space(text[i + 1]))) {
            emit(begin, i + 1);
            begin = i + 1;
        } else if (c == '\n' && i + 1 < text.size() && text[i + 1] == '\n') {
            emit(begin, i);
            begin = i + 1;
        }
    }
    emit(begin, text.size());
    return out;
}

std::vector<EntityMention> extract_stub(const Chunk& chunk) {
    const auto sentences = split_sentences(chunk.text);

    std::vector<std::string> names;
    std::unordered_set<std::string> seen;
    auto flush = [&](std::vector<std::string_view>& run) {
        if (run.empty()) {
            return;
        }
        std::string name;
        for (std::size_t i = 0; i < run.size(); ++i) {
            if (i > 0) {
                name += ' ';
            }
            name += run[i];
        }
        run.clear();
        if (seen.insert(name).second) {
            names.push_back(std::move(name));
        }
    };

    for (const auto sentence : sentences) {
        std::vector<std::string_view> run;
        const auto tokens = text::split_whitespace(sentence);
        for (std::size_t j = 0; j < tokens.size(); ++j) {
            const auto word = strip_word(tokens[j]);
            if (word.had_leading) {
                flush(run);
            }
            const bool capitalized = text::is_uppercase_initial(word.core) &&
                                     text::length(word.core) >= 2 &&
                                     !(j == 0 && kSentenceInitialStopwords.contains(word.core));
            if (!capitalized) {
                flush(run);
                continue;
            }
            run.push_back(word.core);
            if (word.had_trailing) {
                flush(run);
            }
        }
        flush(run);
    }

    std::vector<EntityMention> mentions;
    mentions.reserve(names.size());
    for (auto& name : names) {
        std::string description;
        for (const auto sentence : sentences) {
            if (contains_whole_word(sentence, name)) {
                if (!description.empty()) {
                    description += ' ';
                }
                description += sentence;
            }
        }
        if (description.empty()) {
            continue;  // the run straddled a sentence-internal break
        }
        mentions.push_back({clip_name(name), std::move(description), chunk.chunk_id});
    }
    return mentions;
}

std::vector<EntityMention> parse_extraction_output(std::string_view content, ChunkId chunk_id) {
    const std::string body = strip_code_fence(content);
    const auto open = body.find('[');
    const auto close = body.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw MalformedOutput("extractor reply contains no JSON array");
    }

    json parsed;
    try {
        parsed = json::parse(body.substr(open, close - open + 1));
    } catch (const json::parse_error& e) {
        throw MalformedOutput(std::string("extractor reply is not valid JSON: ") + e.what());
    }
    if (!parsed.is_array()) {
        throw MalformedOutput("extractor reply is not a JSON array");
    }

    std::vector<EntityMention> mentions;
    for (const auto& item : parsed) {
        if (!item.is_object()) {
            throw MalformedOutput("extractor array element is not an object");
        }
        const auto name = item.find("name");
        const auto desc = item.find("description");
        if (name == item.end() || desc == item.end() || !name->is_string() ||
            !desc->is_string()) {
            throw MalformedOutput("extractor entry lacks string name/description");
        }
        const auto& n = name->get_ref<const std::string&>();
        const auto& d = desc->get_ref<const std::string&>();
        if (text::is_blank(n) || text::is_blank(d)) {
            continue;
        }
        mentions.push_back({clip_name(n), std::string(text::trim(d)), chunk_id});
    }
    return mentions;
}

std::vector<EntityMention> merge_duplicate_mentions(std::vector<EntityMention> mentions) {
    std::vector<EntityMention> merged;
    std::unordered_map<std::string, std::size_t> slot;
    for (auto& m : mentions) {
        auto key = normalize_name(m.name);
        if (key.empty()) {
            continue;
        }
        const auto [it, inserted] = slot.try_emplace(std::move(key), merged.size());
        if (inserted) {
            merged.push_back(std::move(m));
        } else {
            auto& target = merged[it->second];
            target.description += ' ';
            target.description += m.description;
        }
    }
    return merged;
}

std::string truncate_description(std::string_view description, int threshold) {
    if (threshold < 2) {
        throw InvalidArgument("shorten threshold too small");
    }
    const auto limit = static_cast<std::size_t>(threshold);
    if (text::length(description) <= limit) {
        return std::string(description);
    }
    // Room for `limit - 1` code points plus the ellipsis. Looking one code
    // point further tells whether the budget ends exactly at a word boundary.
    const auto window = text::prefix(description, limit);
    const auto budget = text::prefix(description, limit - 1);
    const auto tokens = text::whitespace_tokens(window);

    std::size_t cut = std::string_view::npos;
    for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
        if (it->end < window.size() && it->end <= budget.size()) {
            cut = it->end;
            break;
        }
    }
    std::string out(cut == std::string_view::npos || cut == 0 ? budget : window.substr(0, cut));
    out += kEllipsis;
    return out;
}

std::string shorten(std::string_view description, int threshold, Gateway* gateway) {
    if (threshold < 64) {
        throw InvalidArgument("shorten threshold must be >= 64");
    }
    if (text::length(description) <= static_cast<std::size_t>(threshold)) {
        return std::string(description);
    }
    if (gateway != nullptr) {
        try {
            ChatRequest request;
            request.model = gateway->config().chat_model;
            request.messages = {
                {"system", "You shorten entity descriptions without adding information."},
                {"user", "Shorten the following description to at most " +
                             std::to_string(threshold) +
                             " characters. Keep the key facts. Reply with the shortened text "
                             "only.\n\n" +
                             std::string(description)}};
            auto reply = gateway->chat(request, Phase::kIndex);
            const auto trimmed = text::trim(reply.content);
            if (!trimmed.empty() && text::length(trimmed) <= static_cast<std::size_t>(threshold)) {
                return std::string(trimmed);
            }
        } catch (const BackendError&) {
        }
    }
    return truncate_description(description, threshold);
}

std::string extraction_prompt(std::string_view chunk_text) {
    std::string prompt =
        "List the named entities mentioned in the text below. For every entity give its name "
        "and a description of the entity based on the text content only; do not add facts "
        "that the text does not state.\n\n"
        "Reply with a JSON array and nothing else, for example:\n"
        "[{\"name\": \"Marie Curie\", \"description\": \"Physicist who studied radium.\"}]\n\n"
        "Text:\n";
    prompt += chunk_text;
    return prompt;
}

std::vector<EntityMention> extract(const Chunk& chunk, const ExtractorConfig& cfg,
                                   Gateway* gateway) {
    cfg.validate();
    std::vector<EntityMention> raw;
    if (cfg.backend == ExtractorBackend::kStub) {
        raw = extract_stub(chunk);
    } else {
        if (gateway == nullptr) {
            throw InvalidArgument("llm extractor requires a configured gateway");
        }
        raw = extract_llm(chunk, *gateway);
    }

    auto mentions = merge_duplicate_mentions(std::move(raw));
    if (cfg.max_mentions_per_chunk &&
        mentions.size() > static_cast<std::size_t>(*cfg.max_mentions_per_chunk)) {
        mentions.resize(static_cast<std::size_t>(*cfg.max_mentions_per_chunk));
    }
    Gateway* shortener =
        cfg.backend == ExtractorBackend::kLlm && cfg.llm_shortening ? gateway : nullptr;
    for (auto& m : mentions) {
        m.chunk_id = chunk.chunk_id;
        m.description = shorten(m.description, cfg.shorten_threshold, shortener);
    }
    return mentions;
}

std::vector<EntityMention> extract_all(const std::vector<Chunk>& chunks,
                                       const ExtractorConfig& cfg, Gateway* gateway) {
    cfg.validate();
    std::vector<std::vector<EntityMention>> per_chunk(chunks.size());

    const std::size_t workers =
        cfg.backend == ExtractorBackend::kStub
            ? 1
            : std::min(chunks.size(), static_cast<std::size_t>(cfg.max_concurrent_requests));
    if (workers <= 1) {
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            per_chunk[i] = extract(chunks[i], cfg, gateway);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr error;
        std::mutex error_mutex;
        {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (auto i = next++; i < chunks.size() && !failed; i = next++) {
                        try {
                            per_chunk[i] = extract(chunks[i], cfg, gateway);
                        } catch (...) {
                            std::lock_guard lock(error_mutex);
                            if (!error) {
                                error = std::current_exception();
                            }
                            failed = true;
                        }
                    }
                });
            }
        }
        if (error) {
            std::rethrow_exception(error);
        }
    }

    std::vector<EntityMention> all;
    for (auto& part : per_chunk) {
        all.insert(all.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
    }
    return all;
}

}  // namespace unweaver
