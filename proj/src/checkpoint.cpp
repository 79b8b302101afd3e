#include "prerank/checkpoint.hpp"

#include <fstream>

#include "prerank/binio.hpp"

namespace prerank {

namespace {
constexpr char kMagic[4] = {'P', 'T', 'W', 'T'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw store_integrity_error("read failed: " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw store_integrity_error("write failed: " + path);
}

std::string serialize_checkpoint(const ModelConfig& cfg, const Weights& w) {
    ByteWriter bw;
    bw.bytes(kMagic, 4);
    bw.u16(kVersion);
    const std::string json = cfg.to_json();
    bw.u32(static_cast<std::uint32_t>(json.size()));
    bw.bytes(json.data(), json.size());

    std::uint32_t count = 0;
    for_each_param(w, [&](const std::string&, const Matrix&) { ++count; });
    bw.u32(count);
    for_each_param(w, [&](const std::string& name, const Matrix& m) {
        bw.str16(name);
        bw.u32(static_cast<std::uint32_t>(m.rows));
        bw.u32(static_cast<std::uint32_t>(m.cols));
        for (float x : m.v) bw.f32(x);
    });
    return bw.take();
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    ByteReader br(bytes);
    char magic[4];
    br.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw store_integrity_error("checkpoint: bad magic");
    }
    const std::uint16_t version = br.u16();
    if (version != kVersion) {
        throw store_integrity_error("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t json_len = br.u32();
    const std::string json = br.str(json_len);

    Checkpoint ckpt;
    ckpt.cfg = ModelConfig::from_json(json);
    ckpt.weights = init_weights(ckpt.cfg, 0);

    const std::uint32_t count = br.u32();
    std::uint32_t seen = 0;
    for_each_param(ckpt.weights, [&](const std::string& name, Matrix& m) {
        const std::string got = br.str16();
        if (got != name) {
            throw store_integrity_error("checkpoint: expected tensor '" + name + "', found '" +
                                        got + "'");
        }
        const std::uint32_t rows = br.u32();
        const std::uint32_t cols = br.u32();
        if (rows != static_cast<std::uint32_t>(m.rows) ||
            cols != static_cast<std::uint32_t>(m.cols)) {
            throw store_integrity_error("checkpoint: shape mismatch for '" + name + "'");
        }
        for (float& x : m.v) x = br.f32();
        ++seen;
    });
    if (seen != count) throw store_integrity_error("checkpoint: tensor count mismatch");
    ckpt.fingerprint = sha256(bytes.data(), bytes.size());
    return ckpt;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const Weights& w) {
    write_file_bytes(path, serialize_checkpoint(cfg, w));
}

Checkpoint load_checkpoint(const std::string& path) {
    return parse_checkpoint(read_file_bytes(path));
}

Digest256 model_fingerprint(const ModelConfig& cfg, const Weights& w) {
    const std::string bytes = serialize_checkpoint(cfg, w);
    return sha256(bytes.data(), bytes.size());
}

}  // namespace prerank
