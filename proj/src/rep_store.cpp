#include "prerank/rep_store.hpp"

#include <cmath>

#include "prerank/binio.hpp"

namespace prerank {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'T', 'R'};

std::string encode_header(const StoreHeader& h) {
    ByteWriter bw;
    bw.bytes(kMagic, 4);
    bw.u16(h.format_version);
    bw.u16(h.comp_dim);
    bw.u8(static_cast<std::uint8_t>(h.precision));
    bw.u8(h.split_layer);
    bw.bytes(h.fingerprint.data(), h.fingerprint.size());
    bw.u64(h.doc_count);
    return bw.take();
}

StoreHeader decode_header(ByteReader& br) {
    char magic[4];
    br.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw store_integrity_error("store: bad magic");
    StoreHeader h;
    h.format_version = br.u16();
    if (h.format_version != 1) {
        throw store_integrity_error("store: unsupported version " +
                                    std::to_string(h.format_version));
    }
    h.comp_dim = br.u16();
    const std::uint8_t prec = br.u8();
    if (prec != 1 && prec != 2) throw store_integrity_error("store: bad precision code");
    h.precision = static_cast<Precision>(prec);
    h.split_layer = br.u8();
    br.raw(h.fingerprint.data(), h.fingerprint.size());
    h.doc_count = br.u64();
    return h;
}

std::string encode_record(const std::string& doc_id, const CompressedReps& reps) {
    if (reps.rows < 1) throw input_error("store: record must hold at least one token");
    if (reps.rows > 0xffff) throw input_error("store: token count exceeds u16");
    ByteWriter bw;
    bw.str16(doc_id);
    bw.u16(static_cast<std::uint16_t>(reps.rows));
    if (reps.precision == Precision::F32) {
        for (float x : reps.f32) bw.f32(x);
    } else {
        for (std::uint16_t x : reps.f16) bw.u16(x);
    }
    return bw.take();
}

}  // namespace

StoreWriter::StoreWriter(const std::string& path, const StoreHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(header), path_(path) {
    if (!out_) throw input_error("store: cannot open for writing: " + path);
    header_.doc_count = 0;
    const std::string h = encode_header(header_);
    out_.write(h.data(), static_cast<std::streamsize>(h.size()));
}

StoreWriter::~StoreWriter() {
    if (!finalized_ && out_.is_open()) out_.close();
}

void StoreWriter::add(const std::string& doc_id, const CompressedReps& reps) {
    if (finalized_) throw input_error("store: writer already finalized");
    if (seen_.count(doc_id)) throw input_error("store: duplicate doc_id '" + doc_id + "'");
    if (reps.dim != header_.comp_dim) throw input_error("store: record width != header comp_dim");
    if (reps.precision != header_.precision) {
        throw input_error("store: record precision != header precision");
    }
    seen_.emplace(doc_id, true);
    offsets_.emplace_back(doc_id, static_cast<std::uint64_t>(out_.tellp()));
    const std::string rec = encode_record(doc_id, reps);
    out_.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    if (!out_) throw store_integrity_error("store: write failed: " + path_);
    payload_bytes_ += reps.count() * static_cast<std::uint64_t>(bytes_per_value(header_.precision));
}

StoreWriteSummary StoreWriter::finalize() {
    if (finalized_) throw input_error("store: writer already finalized");
    finalized_ = true;
    ByteWriter table;
    for (const auto& [id, off] : offsets_) {
        table.str16(id);
        table.u64(off);
    }
    ByteWriter footer;
    footer.u64(table.size());
    out_.write(table.data().data(), static_cast<std::streamsize>(table.size()));
    out_.write(footer.data().data(), static_cast<std::streamsize>(footer.size()));

    // Patch doc_count now that the stream is complete.
    header_.doc_count = offsets_.size();
    out_.seekp(0);
    const std::string h = encode_header(header_);
    out_.write(h.data(), static_cast<std::streamsize>(h.size()));
    out_.flush();
    if (!out_) throw store_integrity_error("store: finalize failed: " + path_);
    out_.close();

    StoreWriteSummary s;
    s.doc_count = offsets_.size();
    s.payload_bytes = payload_bytes_;
    std::ifstream in(path_, std::ios::binary | std::ios::ate);
    s.bytes_written = static_cast<std::uint64_t>(in.tellg());
    return s;
}

StoreWriteSummary write_store(const std::string& path, const StoreHeader& header,
                              const std::vector<std::pair<std::string, CompressedReps>>& records) {
    StoreWriter w(path, header);
    for (const auto& [id, reps] : records) w.add(id, reps);
    return w.finalize();
}

StoreReader::StoreReader(const std::string& path) : bytes_(read_file_bytes(path)) {
    if (bytes_.size() < kStoreHeaderBytes + 8) throw store_integrity_error("store: truncated file");
    ByteReader br(bytes_);
    header_ = decode_header(br);

    ByteReader footer(bytes_.data() + bytes_.size() - 8, 8);
    const std::uint64_t table_bytes = footer.u64();
    if (table_bytes + 8 + kStoreHeaderBytes > bytes_.size()) {
        throw store_integrity_error("store: offset table length out of range");
    }
    const std::size_t table_start = bytes_.size() - 8 - table_bytes;
    ByteReader table(bytes_.data() + table_start, table_bytes);
    while (table.remaining() > 0) {
        std::string id = table.str16();
        const std::uint64_t off = table.u64();
        if (off < kStoreHeaderBytes || off >= table_start) {
            throw store_integrity_error("store: record offset out of range");
        }
        order_.push_back(id);
        offsets_.emplace(std::move(id), off);
    }
    if (offsets_.size() != header_.doc_count) {
        throw store_integrity_error("store: doc_count does not match offset table");
    }
}

CompressedReps StoreReader::read_doc(const std::string& doc_id) const {
    auto it = offsets_.find(doc_id);
    if (it == offsets_.end()) throw doc_not_found_error(doc_id);
    ByteReader br(bytes_.data() + it->second, bytes_.size() - it->second);
    const std::string id = br.str16();
    if (id != doc_id) throw store_integrity_error("store: record id mismatch at offset");
    const std::uint16_t m_d = br.u16();
    CompressedReps reps;
    reps.rows = m_d;
    reps.dim = header_.comp_dim;
    reps.precision = header_.precision;
    const std::size_t count = reps.count();
    if (header_.precision == Precision::F32) {
        reps.f32.resize(count);
        for (auto& x : reps.f32) x = br.f32();
    } else {
        reps.f16.resize(count);
        for (auto& x : reps.f16) x = br.u16();
    }
    return reps;
}

std::vector<std::string> StoreReader::doc_ids() const { return order_; }

void StoreReader::require_model(const Digest256& fp) const {
    if (header_.fingerprint != fp) {
        throw stale_model_error("store: built by a different model (fingerprint mismatch)");
    }
}

std::uint64_t estimate_storage(double doc_count, double avg_tokens_per_doc, double e,
                               double bytes_per_value) {
    if (doc_count <= 0 || avg_tokens_per_doc <= 0 || e <= 0 || bytes_per_value <= 0) {
        throw input_error("estimate_storage: all inputs must be positive");
    }
    return static_cast<std::uint64_t>(
        std::llround(doc_count * avg_tokens_per_doc * e * bytes_per_value));
}

}  // namespace prerank
