#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace tlcorpus {

/// 128-bit content digest (MD5 of the input bytes, big-endian halves).
struct Digest128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  auto operator<=>(const Digest128&) const = default;

  std::string hex() const;
};

Digest128 digest128(std::string_view bytes);

/// Digest of the little-endian seed bytes followed by `bytes`.
Digest128 seeded_digest128(std::uint64_t seed, std::string_view bytes);

/// Named sub-seed: one top-level seed fans out to independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

struct Digest128Hash {
  std::size_t operator()(const Digest128& d) const noexcept { return static_cast<std::size_t>(d.lo ^ (d.hi >> 7)); }
};

}  // namespace tlcorpus
