#include "prerank/tokenize.hpp"

#include <cctype>

#include "prerank/errors.hpp"
#include "prerank/model.hpp"

namespace prerank {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : s) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

int token_id(const std::string& word, int vocab_size) {
    if (vocab_size <= kReservedIds) throw input_error("token_id: vocab_size too small");
    const std::uint64_t buckets = static_cast<std::uint64_t>(vocab_size - kReservedIds);
    return kReservedIds + static_cast<int>(fnv1a64(word) % buckets);
}

std::vector<int> tokenize(const std::string& text, int vocab_size) {
    std::vector<int> ids;
    for (const std::string& w : split_words(text)) ids.push_back(token_id(w, vocab_size));
    return ids;
}

}  // namespace prerank
