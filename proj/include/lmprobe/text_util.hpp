#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lmprobe {

// Strip leading/trailing ASCII whitespace.
std::string_view trim(std::string_view s);

// Lowercase ASCII letters; other bytes pass through unchanged.
std::string to_lower_ascii(std::string_view s);

// Canonical label form used for duplicate detection and fuzzy matching:
// trim, collapse internal whitespace runs to a single space, lowercase ASCII.
std::string normalize_label(std::string_view s);

// Split on ASCII whitespace; empty input yields an empty vector.
std::vector<std::string> whitespace_split(std::string_view s);

// Optimal-string-alignment edit distance: insert/delete/substitute plus
// adjacent transposition, each cost 1.  ("appel" -> "apple" is 1, not 2.)
size_t osa_distance(std::string_view a, std::string_view b);

// True iff s is well-formed UTF-8 (no overlongs, surrogates, or > U+10FFFF).
bool is_valid_utf8(std::string_view s);

// FNV-1a 64-bit hash; the seeded overload folds `seed` in first so distinct
// seeds give unrelated hash families.
uint64_t fnv1a64(std::string_view bytes);
uint64_t fnv1a64(uint64_t seed, std::string_view bytes);

// Incremental FNV-1a, used to hash token-id sequences without materializing
// an intermediate string.
struct Fnv1a64 {
  uint64_t state = 14695981039346656037ull;
  void update(std::string_view bytes);
  void update_u64(uint64_t v);  // hashes the 8 little-endian bytes of v
  uint64_t digest() const { return state; }
};

// Hex-encode bytes (lowercase).
std::string to_hex(const unsigned char* data, size_t len);

// SHA-256 of `bytes`, hex-encoded (64 lowercase hex chars).
std::string sha256_hex(std::string_view bytes);

}  // namespace lmprobe
