#include "tlcorpus/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace tlcorpus {

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

struct MdDeleter {
  void operator()(EVP_MD* md) const { EVP_MD_free(md); }
};

const EVP_MD* md5() {
  static const std::unique_ptr<EVP_MD, MdDeleter> md(EVP_MD_fetch(nullptr, "MD5", nullptr));
  if (!md) throw std::runtime_error("MD5 digest unavailable");
  return md.get();
}

// One context per thread; re-initialised for every digest.
EVP_MD_CTX* thread_ctx() {
  thread_local const std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  return ctx.get();
}

std::uint64_t load_be64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

Digest128 finish(EVP_MD_CTX* ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, out.data(), &len);
  return {load_be64(out.data()), load_be64(out.data() + 8)};
}

}  // namespace

std::string Digest128::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

Digest128 digest128(std::string_view bytes) {
  EVP_MD_CTX* ctx = thread_ctx();
  EVP_DigestInit_ex(ctx, md5(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  return finish(ctx);
}

Digest128 seeded_digest128(std::uint64_t seed, std::string_view bytes) {
  std::array<unsigned char, 8> le{};
  for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>(seed >> (8 * i));
  EVP_MD_CTX* ctx = thread_ctx();
  EVP_DigestInit_ex(ctx, md5(), nullptr);
  EVP_DigestUpdate(ctx, le.data(), le.size());
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  return finish(ctx);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return seeded_digest128(seed, name).hi;
}

}  // namespace tlcorpus
