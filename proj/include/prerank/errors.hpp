#pragma once

#include <stdexcept>
#include <string>

namespace prerank {

// Caller handed us something malformed (bad dims, out-of-range ids, ...).
struct input_error : std::invalid_argument {
    explicit input_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Precomputed representations do not belong to the serving model.
struct stale_model_error : std::runtime_error {
    explicit stale_model_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Store file is structurally damaged (bad magic, truncated payload, ...).
struct store_integrity_error : std::runtime_error {
    explicit store_integrity_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct doc_not_found_error : std::runtime_error {
    explicit doc_not_found_error(const std::string& doc_id)
        : std::runtime_error("document not found in store: " + doc_id), doc_id(doc_id) {}
    std::string doc_id;
};

}  // namespace prerank
