#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace prerank {

using Digest256 = std::array<std::uint8_t, 32>;

// FIPS 180-4 SHA-256.
class Sha256 {
  public:
    Sha256();
    void update(const void* data, std::size_t len);
    Digest256 finish();

  private:
    void process_block(const std::uint8_t* block);

    std::array<std::uint32_t, 8> state_;
    std::array<std::uint8_t, 64> buffer_;
    std::size_t buffered_ = 0;
    std::uint64_t total_ = 0;
};

Digest256 sha256(const void* data, std::size_t len);
Digest256 sha256(const std::string& s);
std::string digest_hex(const Digest256& d);

}  // namespace prerank
