#include "unweaver/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "unweaver/errors.hpp"

namespace unweaver::text {
namespace {

struct CodePoint {
    UChar32 value;
    std::size_t begin;
    std::size_t end;
};

// Decodes the code point starting at `pos`; malformed sequences yield
// U+FFFD covering one byte.
CodePoint next_code_point(std::string_view s, std::size_t pos) {
    auto i = static_cast<int32_t>(pos);
    UChar32 c = 0;
    U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), i, static_cast<int32_t>(s.size()), c);
    if (c < 0) {
        c = 0xFFFD;
    }
    return {c, pos, static_cast<std::size_t>(i)};
}

}  // namespace

std::vector<TokenSpan> whitespace_tokens(std::string_view s) {
    std::vector<TokenSpan> tokens;
    std::size_t pos = 0;
    bool in_token = false;
    std::size_t start = 0;
    while (pos < s.size()) {
        const auto cp = next_code_point(s, pos);
        const bool space = u_isUWhiteSpace(cp.value);
        if (space && in_token) {
            tokens.push_back({start, cp.begin});
            in_token = false;
        } else if (!space && !in_token) {
            start = cp.begin;
            in_token = true;
        }
        pos = cp.end;
    }
    if (in_token) {
        tokens.push_back({start, s.size()});
    }
    return tokens;
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
    std::vector<std::string_view> out;
    for (const auto& t : whitespace_tokens(s)) {
        out.push_back(s.substr(t.begin, t.end - t.begin));
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto tokens = whitespace_tokens(s);
    if (tokens.empty()) {
        return {};
    }
    return s.substr(tokens.front().begin, tokens.back().end - tokens.front().begin);
}

bool is_blank(std::string_view s) { return whitespace_tokens(s).empty(); }

std::size_t length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t pos = 0; pos < s.size(); pos = next_code_point(s, pos).end) {
        ++n;
    }
    return n;
}

std::string_view prefix(std::string_view s, std::size_t n) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n && pos < s.size(); ++i) {
        pos = next_code_point(s, pos).end;
    }
    return s.substr(0, pos);
}

std::string fold_case(std::string_view s) {
    auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    u.foldCase();
    std::string out;
    u.toUTF8String(out);
    return out;
}

std::string nfkc(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status)) {
        throw Error(ErrorCode::kInvalidArgument, "ICU NFKC normalizer unavailable");
    }
    auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    icu::UnicodeString normalized = norm->normalize(u, status);
    if (U_FAILURE(status)) {
        throw Error(ErrorCode::kInvalidArgument, "NFKC normalization failed");
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

bool is_uppercase_initial(std::string_view word) {
    if (word.empty()) {
        return false;
    }
    const auto cp = next_code_point(word, 0);
    return u_isupper(cp.value) || u_istitle(cp.value);
}

}  // namespace unweaver::text
