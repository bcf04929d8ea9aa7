#pragma once

#include <string>

namespace sensenet {

// Porter's 1980 suffix-stripping algorithm. Input is expected lowercase;
// tokens shorter than three letters or containing non-letters are
// returned unchanged.
std::string porter_stem(const std::string& word);

}  // namespace sensenet
