// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace roclab {

// CRC-32 (reflected, poly 0xEDB88320), as used by zip/png.
std::uint32_t crc32(const void* data, std::size_t len,
                    std::uint32_t seed = 0);

// SHA-256 hex digest.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);

// Streaming SHA-256 for multi-block artifacts.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, std::size_t len);
  std::string hex_final();

 private:
  std::uint32_t h_[8];
  std::uint64_t total_ = 0;
  unsigned char buf_[64];
  std::size_t buflen_ = 0;
  void block(const unsigned char* p);
};

}  // namespace roclab
