#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sensenet {

// Half-open [start, end) token index range.
using Span = std::pair<int, int>;

// Token strings that tokenize() must never split: abbreviations and the
// marker tokens the pipeline itself injects.
const std::vector<std::string>& protected_tokens();

// Lowercases, isolates punctuation, folds standalone digit runs (integers
// and decimals like "25.3" or "3,000") into "<digit>", and keeps "e.g." /
// "i.e." as single tokens. Digits embedded in words ("ipv4") stay put.
std::vector<std::string> tokenize(const std::string& text);

// Sentence boundary after every "." token. "e.g." / "i.e." are whole
// tokens, so they never trigger a boundary. A trailing fragment without a
// terminator becomes the final span. The result partitions [0, |tokens|).
std::vector<Span> split_sentences(const std::vector<std::string>& tokens);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace sensenet
