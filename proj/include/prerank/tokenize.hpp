#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prerank {

// Lowercased maximal alphanumeric runs.
std::vector<std::string> split_words(const std::string& text);

std::uint64_t fnv1a64(const std::string& s);

// Stable hash vocabulary: id = kReservedIds + fnv1a64(word) % (vocab_size - kReservedIds).
// Deterministic across runs and platforms.
int token_id(const std::string& word, int vocab_size);

std::vector<int> tokenize(const std::string& text, int vocab_size);

}  // namespace prerank
