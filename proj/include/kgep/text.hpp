#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace kgep::text {

// Lowercases ASCII and splits on every byte that is not [a-z0-9] or part of a
// multi-byte UTF-8 sequence.
std::vector<std::string> tokenize(std::string_view text);

// Porter (1980) suffix-stripping stemmer. Words that are not pure [a-z], or
// are shorter than three letters, are returned unchanged.
std::string porter_stem(std::string_view word);

const std::unordered_set<std::string>& english_stopwords();

// One term per line; blank lines and lines starting with '#' are ignored.
std::unordered_set<std::string> load_stopwords(const std::string& path);

}  // namespace kgep::text
