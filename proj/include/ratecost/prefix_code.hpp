#pragma once

// Conditional Shannon codes: one prefix-free code per (stage, action
// context), with lengths ceil(-log2 p(u | context)).
//
// Codewords are assigned in order of decreasing probability (ties by symbol
// index) as the leading bits of the cumulative dyadic sum of the preceding
// symbols' 2^-length. Lengths are nondecreasing in that order, so the
// cumulative sum is exact and the code is prefix-free whenever Kraft holds.

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "ratecost/system_model.hpp"

namespace ratecost {

using Bits = std::vector<bool>;

/// Appends bits most-significant-first into bytes; pad bits are zero.
class BitWriter {
 public:
  void put(bool bit);
  void put(const Bits& bits);
  std::uint64_t bit_count() const { return bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_count)
      : bytes_(bytes), bits_(bit_count) {}
  bool exhausted() const { return pos_ >= bits_; }
  std::uint64_t position() const { return pos_; }
  /// Throws VerificationError past the end.
  bool get();

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
  std::uint64_t pos_ = 0;
};

/// ceil(-log2 p) for p in (0, 1], exact.
int shannon_length(double p);

class PrefixCode {
 public:
  PrefixCode() = default;
  /// Symbols with zero probability receive no codeword. Throws SpecError on
  /// an invalid pmf and VerificationError if Kraft fails.
  explicit PrefixCode(std::vector<double> pmf);

  const std::vector<double>& pmf() const { return pmf_; }
  bool has_symbol(int u) const;
  int length(int u) const;
  const Bits& codeword(int u) const;
  double expected_length() const;
  double entropy() const;
  double kraft_sum() const;

  void encode(int u, BitWriter& out) const;
  /// Reads exactly one codeword. Throws VerificationError on a malformed
  /// prefix or a truncated stream.
  int decode(BitReader& in) const;

 private:
  struct Node {
    int child[2] = {-1, -1};
    int symbol = -1;
  };

  std::vector<double> pmf_;
  std::vector<int> lengths_;  // -1 when absent
  std::vector<Bits> codewords_;
  std::vector<Node> trie_;
};

/// Codes for every stage and every reachable action context of a law.
class ContextCodebook {
 public:
  ContextCodebook() = default;
  static ContextCodebook build(const JointLaw& law);

  int horizon() const { return static_cast<int>(codes_.size()); }
  int num_actions() const { return nu_; }
  bool has_context(int t, std::uint64_t context) const;
  /// Throws SpecError for an unreachable context.
  const PrefixCode& code(int t, std::uint64_t context) const;
  const std::unordered_map<std::uint64_t, PrefixCode>& stage(int t) const { return codes_[t]; }

  /// E[l(B_t)] for every stage under `law` (which may differ from the law
  /// the codes were built from). Throws SpecError when `law` puts mass on a
  /// symbol without a codeword.
  std::vector<double> expected_lengths(const JointLaw& law) const;

 private:
  int nu_ = 0;
  std::vector<std::unordered_map<std::uint64_t, PrefixCode>> codes_;
};

}  // namespace ratecost
