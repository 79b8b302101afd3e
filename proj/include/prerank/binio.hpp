#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "prerank/errors.hpp"

namespace prerank {

// Little-endian byte packing. All on-disk formats go through these so the
// layout is platform independent.
class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { append(v); }
    void u32(std::uint32_t v) { append(v); }
    void u64(std::uint64_t v) { append(v); }
    void f32(float v) { append(std::bit_cast<std::uint32_t>(v)); }
    void bytes(const void* data, std::size_t len) {
        buf_.append(static_cast<const char*>(data), len);
    }
    void str16(const std::string& s) {
        if (s.size() > 0xffff) throw input_error("string too long for u16 length prefix");
        u16(static_cast<std::uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }

    const std::string& data() const { return buf_; }
    std::string take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

  private:
    template <typename T>
    void append(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }

    std::string buf_;
};

class ByteReader {
  public:
    ByteReader(const void* data, std::size_t len)
        : p_(static_cast<const std::uint8_t*>(data)), len_(len) {}
    explicit ByteReader(const std::string& s) : ByteReader(s.data(), s.size()) {}

    std::uint8_t u8() { return take<std::uint8_t>(); }
    std::uint16_t u16() { return take<std::uint16_t>(); }
    std::uint32_t u32() { return take<std::uint32_t>(); }
    std::uint64_t u64() { return take<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(take<std::uint32_t>()); }
    std::string str16() {
        const std::uint16_t n = u16();
        return str(n);
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
        pos_ += n;
        return s;
    }
    void raw(void* out, std::size_t n) {
        need(n);
        std::memcpy(out, p_ + pos_, n);
        pos_ += n;
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return len_ - pos_; }

  private:
    template <typename T>
    T take() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v = static_cast<T>(v | (static_cast<T>(p_[pos_ + i]) << (8 * i)));
        }
        pos_ += sizeof(T);
        return v;
    }

    void need(std::size_t n) const {
        if (pos_ + n > len_) throw store_integrity_error("unexpected end of data");
    }

    const std::uint8_t* p_;
    std::size_t len_;
    std::size_t pos_ = 0;
};

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::string& bytes);

}  // namespace prerank
