#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace maskprobe {

// Streaming SHA-256, hex-encoded result.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  // Appends a double as a little-endian float32, the canonical form
  // used for parameter digests.
  void update_f32(double v);
  void update_u32(std::uint32_t v);

  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);

}  // namespace maskprobe
