#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "forkstore/bytes.hpp"
#include "forkstore/digest.hpp"
#include "forkstore/error.hpp"

namespace forkstore {

// Approximate encoded size of one index entry (cid + element count), used to
// turn a byte target for index nodes into an entry-count pattern width.
inline constexpr double kIndexEntryBytesEstimate = 40.0;

/// Knobs of content-defined splitting. Pattern widths q (leaf) and r (index)
/// are derived from the byte targets; see `ChunkerConfig::make`.
struct ChunkerConfig {
  std::uint32_t window_k = 32;
  std::uint32_t leaf_bits_q = 12;
  std::uint32_t index_bits_r = 7;
  double max_factor_alpha = 8.0;
  std::uint64_t target_leaf_bytes = 4096;
  std::uint64_t target_index_bytes = 4096;

  static std::uint32_t bits_for(double expected_units) {
    const double b = std::round(std::log2(std::max(expected_units, 2.0)));
    return static_cast<std::uint32_t>(std::clamp(b, 1.0, 62.0));
  }

  static ChunkerConfig make(std::uint64_t leaf_bytes = 4096, std::uint64_t index_bytes = 4096,
                            double alpha = 8.0, std::uint32_t window = 32) {
    ChunkerConfig c;
    c.window_k = window;
    c.max_factor_alpha = alpha;
    c.target_leaf_bytes = leaf_bytes;
    c.target_index_bytes = index_bytes;
    // The leaf pattern is tested at every byte, so 2^q bytes separate patterns on average.
    c.leaf_bits_q = bits_for(static_cast<double>(leaf_bytes));
    c.index_bits_r = bits_for(static_cast<double>(index_bytes) / kIndexEntryBytesEstimate);
    c.validate();
    return c;
  }

  void validate() const {
    if (window_k < 1 || window_k > 255) throw Error(ErrorCode::InvalidArgument, "window must be in [1, 255]");
    if (leaf_bits_q < 1 || leaf_bits_q > 62 || index_bits_r < 1 || index_bits_r > 62)
      throw Error(ErrorCode::InvalidArgument, "pattern bit widths must be in [1, 62]");
    if (!(max_factor_alpha > 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must exceed 1");
    if (target_leaf_bytes == 0 || target_index_bytes == 0)
      throw Error(ErrorCode::InvalidArgument, "chunk size targets must be positive");
  }

  std::uint64_t max_leaf_bytes() const {
    return static_cast<std::uint64_t>(max_factor_alpha * static_cast<double>(target_leaf_bytes));
  }
  std::uint64_t max_index_bytes() const {
    return static_cast<std::uint64_t>(max_factor_alpha * static_cast<double>(target_index_bytes));
  }

  bool operator==(const ChunkerConfig&) const = default;
};

inline constexpr std::uint64_t kSubstitutionSeed = 0x466F726B53746F7BULL;

/// Byte substitution h(b): 256 pseudo-random words from splitmix64 seeded with
/// `kSubstitutionSeed`, masked to the pattern width by the caller. Part of the
/// format: changing it changes every cid.
inline const std::array<std::uint64_t, 256>& substitution_table() {
  static const std::array<std::uint64_t, 256> table = [] {
    std::array<std::uint64_t, 256> t{};
    std::uint64_t x = kSubstitutionSeed;
    for (auto& v : t) {
      x += 0x9E3779B97F4A7C15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      v = z ^ (z >> 31);
    }
    return t;
  }();
  return table;
}

inline constexpr std::uint64_t low_mask(std::uint32_t bits) {
  return bits >= 64 ? ~0ULL : ((1ULL << bits) - 1);
}

// s^n: rotate left by n within the low `bits` bits.
inline constexpr std::uint64_t rotate_within(std::uint64_t v, std::uint32_t n, std::uint32_t bits) {
  n %= bits;
  if (n == 0) return v;
  return ((v << n) | (v >> (bits - n))) & low_mask(bits);
}

/// Cyclic-polynomial rolling hash over the last k bytes, values in [0, 2^q).
class RollingHash {
 public:
  RollingHash(std::uint32_t window, std::uint32_t bits) : k_(window), q_(bits), ring_(window, 0) {
    const auto& t = substitution_table();
    const std::uint64_t m = low_mask(q_);
    for (int b = 0; b < 256; ++b) {
      in_[b] = t[b] & m;
      out_[b] = rotate_within(in_[b], k_, q_);
    }
  }

  void reset() {
    value_ = 0;
    fill_ = 0;
    pos_ = 0;
  }

  void roll(std::uint8_t incoming) {
    value_ = rotate_within(value_, 1, q_) ^ in_[incoming];
    if (fill_ == k_) {
      value_ ^= out_[ring_[pos_]];
    } else {
      ++fill_;
    }
    ring_[pos_] = incoming;
    if (++pos_ == k_) pos_ = 0;
  }

  std::uint64_t value() const { return value_; }
  bool full() const { return fill_ == k_; }
  std::uint32_t window() const { return k_; }
  std::uint32_t bits() const { return q_; }

  std::uint64_t substitute(std::uint8_t b) const { return in_[b]; }

 private:
  std::uint32_t k_;
  std::uint32_t q_;
  std::vector<std::uint8_t> ring_;
  std::array<std::uint64_t, 256> in_{};
  std::array<std::uint64_t, 256> out_{};
  std::uint64_t value_ = 0;
  std::uint32_t fill_ = 0;
  std::uint32_t pos_ = 0;
};

/// Leaf pattern: the low q bits of the rolling value are all zero.
inline bool is_leaf_pattern(std::uint64_t hash_value, std::uint32_t q) {
  return (hash_value & low_mask(q)) == 0;
}

inline bool is_leaf_pattern(const RollingHash& h) { return h.full() && is_leaf_pattern(h.value(), h.bits()); }

/// Index pattern: the low r bits of the child's cid are all zero.
inline bool is_index_pattern(const Cid& entry_cid, std::uint32_t r) {
  return (entry_cid.low64() & low_mask(r)) == 0;
}

enum class SplitLevel { Leaf, Index };

enum class CloseReason { None, Pattern, Forced };

struct SplitStats {
  std::uint64_t groups = 0;
  std::uint64_t pattern_closes = 0;
  std::uint64_t forced_closes = 0;
  std::uint64_t oversized_elements = 0;

  void merge(const SplitStats& o) {
    groups += o.groups;
    pattern_closes += o.pattern_closes;
    forced_closes += o.forced_closes;
    oversized_elements += o.oversized_elements;
  }
};

/// Incremental boundary detector for one level of a tree.
///
/// Elements are offered in order. Before adding, `must_close_before` tells
/// whether the open group has to be closed to stay within the size bound;
/// `add` then reports whether the group closes at the end of this element.
/// Leaf groups restart the rolling window, and the pattern test stays off
/// until the window holds k bytes of the current group.
class Splitter {
 public:
  Splitter(const ChunkerConfig& cfg, SplitLevel level)
      : level_(level),
        max_bytes_(level == SplitLevel::Leaf ? cfg.max_leaf_bytes() : cfg.max_index_bytes()),
        r_(cfg.index_bits_r),
        hash_(cfg.window_k, cfg.leaf_bits_q) {}

  bool must_close_before(std::size_t element_bytes) const {
    return bytes_ > 0 && bytes_ + element_bytes > max_bytes_;
  }

  CloseReason add(ByteView element) {
    bool pattern = false;
    if (level_ == SplitLevel::Leaf) {
      for (std::uint8_t b : element) {
        hash_.roll(b);
        if (!pattern && hash_.full() && hash_.value() == 0) pattern = true;
      }
    } else {
      if (element.size() < Cid::kSize) throw Error(ErrorCode::Corrupt, "index entry shorter than a cid");
      pattern = is_index_pattern(Cid::from_view(element.first(Cid::kSize)), r_);
    }
    const bool was_empty = bytes_ == 0;
    bytes_ += element.size();
    ++elements_;
    if (was_empty && element.size() > max_bytes_) {
      ++stats_.oversized_elements;
      diagnostics_.push_back("element of " + std::to_string(element.size()) +
                             " bytes exceeds the chunk bound of " + std::to_string(max_bytes_));
      return CloseReason::Forced;
    }
    if (pattern) return CloseReason::Pattern;
    if (bytes_ >= max_bytes_) return CloseReason::Forced;
    return CloseReason::None;
  }

  /// Byte-per-element fast path: consumes bytes until the group closes or the
  /// input ends. Returns the number consumed.
  std::size_t add_bytes(ByteView data, CloseReason& reason) {
    reason = CloseReason::None;
    std::size_t i = 0;
    const std::uint64_t room = max_bytes_ - bytes_;
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(data.size(), room));
    for (; i < n; ++i) {
      hash_.roll(data[i]);
      if (hash_.full() && hash_.value() == 0) {
        ++i;
        reason = CloseReason::Pattern;
        break;
      }
    }
    bytes_ += i;
    elements_ += i;
    if (reason == CloseReason::None && bytes_ >= max_bytes_) reason = CloseReason::Forced;
    return i;
  }

  /// Ends the open group, recording why.
  void close(CloseReason why) {
    ++stats_.groups;
    if (why == CloseReason::Pattern) ++stats_.pattern_closes;
    if (why == CloseReason::Forced) ++stats_.forced_closes;
    bytes_ = 0;
    elements_ = 0;
    hash_.reset();
  }

  std::uint64_t group_bytes() const { return bytes_; }
  std::uint64_t group_elements() const { return elements_; }
  std::uint64_t max_bytes() const { return max_bytes_; }
  const SplitStats& stats() const { return stats_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  SplitLevel level_;
  std::uint64_t max_bytes_;
  std::uint32_t r_;
  RollingHash hash_;
  std::uint64_t bytes_ = 0;
  std::uint64_t elements_ = 0;
  SplitStats stats_;
  std::vector<std::string> diagnostics_;
};

struct SplitResult {
  std::vector<std::size_t> ends;  // exclusive end index of each group
  SplitStats stats;
  std::vector<std::string> diagnostics;
};

/// Groups a sequence of elements into chunk payloads. Empty input yields one
/// empty group. Elements are never cut.
inline SplitResult split_elements(const std::vector<ByteView>& elements, SplitLevel level,
                                  const ChunkerConfig& cfg) {
  SplitResult out;
  Splitter s(cfg, level);
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (s.must_close_before(elements[i].size())) {
      s.close(CloseReason::Forced);
      out.ends.push_back(i);
    }
    if (CloseReason why = s.add(elements[i]); why != CloseReason::None) {
      s.close(why);
      out.ends.push_back(i + 1);
    }
  }
  if (s.group_elements() > 0 || out.ends.empty()) {
    s.close(CloseReason::None);
    out.ends.push_back(elements.size());
  }
  out.stats = s.stats();
  out.diagnostics = s.diagnostics();
  return out;
}

/// Splits raw bytes where each byte is its own element (Blob leaves). Returns
/// exclusive group end offsets.
inline SplitResult split_blob(ByteView data, const ChunkerConfig& cfg) {
  SplitResult out;
  Splitter s(cfg, SplitLevel::Leaf);
  std::size_t off = 0;
  while (off < data.size()) {
    CloseReason why;
    off += s.add_bytes(data.subspan(off), why);
    if (why != CloseReason::None) {
      s.close(why);
      out.ends.push_back(off);
    }
  }
  if (s.group_elements() > 0 || out.ends.empty()) {
    s.close(CloseReason::None);
    out.ends.push_back(data.size());
  }
  out.stats = s.stats();
  return out;
}

}  // namespace forkstore
