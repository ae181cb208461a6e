#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by the chunker, the stub backends and name
// normalization. Invalid byte sequences are treated as single U+FFFD code
// points when counting and are passed through unchanged otherwise.
namespace unweaver::text {

struct TokenSpan {
    std::size_t begin = 0;  // byte offset
    std::size_t end = 0;    // byte offset, exclusive
};

/// Splits on Unicode white space (White_Space property).
std::vector<TokenSpan> whitespace_tokens(std::string_view s);

std::vector<std::string_view> split_whitespace(std::string_view s);

std::string_view trim(std::string_view s);

bool is_blank(std::string_view s);

/// Number of code points.
std::size_t length(std::string_view s);

/// Longest prefix holding at most `n` code points.
std::string_view prefix(std::string_view s, std::size_t n);

/// Full Unicode case folding.
std::string fold_case(std::string_view s);

/// NFKC normalization.
std::string nfkc(std::string_view s);

bool is_uppercase_initial(std::string_view word);

}  // namespace unweaver::text
