#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "prerank/compress.hpp"
#include "prerank/digest.hpp"

namespace prerank {

// On-disk layout (all little-endian, normative, see docs/FORMATS.md):
//   magic "PTTR" | u16 version | u16 comp_dim | u8 precision | u8 split_layer
//   | 32-byte model fingerprint | u64 doc_count
//   records: u16 id_len | id bytes | u16 token_count | payload
//   offset table: per doc (u16 id_len | id bytes | u64 record_offset)
//   footer: u64 table_bytes
struct StoreHeader {
    std::uint16_t format_version = 1;
    std::uint16_t comp_dim = 0;
    Precision precision = Precision::F32;
    std::uint8_t split_layer = 0;
    Digest256 fingerprint{};
    std::uint64_t doc_count = 0;
};

constexpr std::size_t kStoreHeaderBytes = 50;

struct StoreWriteSummary {
    std::uint64_t bytes_written = 0;
    std::uint64_t doc_count = 0;
    std::uint64_t payload_bytes = 0;
};

// Single writer; records keep insertion order. Duplicate ids are rejected.
class StoreWriter {
  public:
    StoreWriter(const std::string& path, const StoreHeader& header);
    ~StoreWriter();

    void add(const std::string& doc_id, const CompressedReps& reps);
    StoreWriteSummary finalize();

  private:
    std::ofstream out_;
    StoreHeader header_;
    std::string path_;
    std::vector<std::pair<std::string, std::uint64_t>> offsets_;
    std::unordered_map<std::string, bool> seen_;
    std::uint64_t payload_bytes_ = 0;
    bool finalized_ = false;
};

StoreWriteSummary write_store(const std::string& path, const StoreHeader& header,
                              const std::vector<std::pair<std::string, CompressedReps>>& records);

// Read-only view; safe to share across threads after construction.
class StoreReader {
  public:
    explicit StoreReader(const std::string& path);

    const StoreHeader& header() const { return header_; }
    bool contains(const std::string& doc_id) const { return offsets_.count(doc_id) != 0; }
    CompressedReps read_doc(const std::string& doc_id) const;
    std::vector<std::string> doc_ids() const;  // insertion order

    // Throws stale_model_error unless the store was built by this model.
    void require_model(const Digest256& fp) const;

  private:
    std::string bytes_;
    StoreHeader header_;
    std::unordered_map<std::string, std::uint64_t> offsets_;
    std::vector<std::string> order_;
};

// Payload-only storage estimate: doc_count * avg_tokens_per_doc * e * bytes_per_value.
std::uint64_t estimate_storage(double doc_count, double avg_tokens_per_doc, double e,
                               double bytes_per_value);

}  // namespace prerank
