#include "maskprobe/digest.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>

#include "maskprobe/errors.hpp"

namespace maskprobe {

namespace {
std::string to_hex(const unsigned char* d, unsigned len) {
  static const char* hexchars = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned i = 0; i < len; ++i) {
    out[2 * i] = hexchars[d[i] >> 4];
    out[2 * i + 1] = hexchars[d[i] & 0xf];
  }
  return out;
}
}  // namespace

Sha256::Sha256() {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: init failed");
  ctx_ = ctx;
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(const void* data, std::size_t len) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len) != 1)
    throw Error("sha256: update failed");
}

void Sha256::update_f32(double v) {
  float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  update_u32(bits);
}

void Sha256::update_u32(std::uint32_t v) {
  unsigned char le[4] = {static_cast<unsigned char>(v & 0xff),
                         static_cast<unsigned char>((v >> 8) & 0xff),
                         static_cast<unsigned char>((v >> 16) & 0xff),
                         static_cast<unsigned char>((v >> 24) & 0xff)};
  update(le, 4);
}

std::string Sha256::hex_digest() {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md, &len) != 1)
    throw Error("sha256: final failed");
  return to_hex(md, len);
}

std::string sha256_hex(const void* data, std::size_t len) {
  Sha256 h;
  h.update(data, len);
  return h.hex_digest();
}

std::string sha256_hex(const std::string& s) {
  return sha256_hex(s.data(), s.size());
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for digest: " + path);
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex_digest();
}

}  // namespace maskprobe
