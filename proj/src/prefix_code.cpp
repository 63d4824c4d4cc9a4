#include "ratecost/prefix_code.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "ratecost/error.hpp"

namespace ratecost {

void BitWriter::put(bool bit) {
  if (bits_ % 8 == 0) bytes_.push_back(0);
  if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
  ++bits_;
}

void BitWriter::put(const Bits& bits) {
  for (bool b : bits) put(b);
}

bool BitReader::get() {
  if (pos_ >= bits_) throw VerificationError("bit stream ended inside a codeword");
  const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
  ++pos_;
  return bit;
}

int shannon_length(double p) {
  if (!(p > 0.0) || p > 1.0) throw SpecError("code probability must lie in (0, 1]");
  // p = m 2^e with m in [0.5, 1): 2^(e-1) <= p < 2^e, so ceil(-log2 p) = 1 - e.
  int e = 0;
  std::frexp(p, &e);
  return 1 - e;
}

PrefixCode::PrefixCode(std::vector<double> pmf) : pmf_(std::move(pmf)) {
  if (pmf_.empty()) throw SpecError("empty pmf");
  double total = 0.0;
  for (double p : pmf_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw SpecError("pmf entries must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw SpecError("pmf must sum to one");

  const int nu = static_cast<int>(pmf_.size());
  lengths_.assign(nu, -1);
  codewords_.assign(nu, {});
  std::vector<int> order;
  for (int u = 0; u < nu; ++u) {
    if (pmf_[u] > 0.0) order.push_back(u);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pmf_[a] > pmf_[b]; });

  // Running codeword: the cumulative dyadic sum, extended with zeros as the
  // lengths grow and incremented after each assignment.
  Bits next;
  bool overflow = false;
  for (int u : order) {
    if (overflow) throw VerificationError("Kraft inequality violated");
    const int len = shannon_length(std::min(1.0, pmf_[u]));
    next.resize(len, false);
    lengths_[u] = len;
    codewords_[u] = next;
    // Increment as a binary number; a carry out of the top bit means the
    // interval [0, 1) is used up.
    int i = len - 1;
    while (i >= 0 && next[i]) next[i--] = false;
    if (i < 0) {
      overflow = true;
    } else {
      next[i] = true;
    }
  }

  trie_.emplace_back();
  for (int u : order) {
    int node = 0;
    for (bool b : codewords_[u]) {
      if (trie_[node].child[b] < 0) {
        trie_[node].child[b] = static_cast<int>(trie_.size());
        trie_.emplace_back();
      }
      node = trie_[node].child[b];
    }
    trie_[node].symbol = u;
  }
}

bool PrefixCode::has_symbol(int u) const {
  return u >= 0 && u < static_cast<int>(lengths_.size()) && lengths_[u] >= 0;
}

int PrefixCode::length(int u) const {
  if (!has_symbol(u)) throw SpecError("symbol has no codeword");
  return lengths_[u];
}

const Bits& PrefixCode::codeword(int u) const {
  if (!has_symbol(u)) throw SpecError("symbol has no codeword");
  return codewords_[u];
}

double PrefixCode::expected_length() const {
  double s = 0.0;
  for (std::size_t u = 0; u < pmf_.size(); ++u) {
    if (lengths_[u] >= 0) s += pmf_[u] * lengths_[u];
  }
  return s;
}

double PrefixCode::entropy() const { return entropy_bits(pmf_); }

double PrefixCode::kraft_sum() const {
  double s = 0.0;
  for (int l : lengths_) {
    if (l >= 0) s += std::ldexp(1.0, -l);
  }
  return s;
}

void PrefixCode::encode(int u, BitWriter& out) const {
  if (!has_symbol(u)) {
    std::ostringstream os;
    os << "symbol " << u << " has no codeword in this context";
    throw SpecError(os.str());
  }
  out.put(codewords_[u]);
}

int PrefixCode::decode(BitReader& in) const {
  int node = 0;
  while (trie_[node].symbol < 0) {
    const int next = trie_[node].child[in.get() ? 1 : 0];
    if (next < 0) throw VerificationError("malformed prefix: bits match no codeword");
    node = next;
  }
  return trie_[node].symbol;
}

ContextCodebook ContextCodebook::build(const JointLaw& law) {
  ContextCodebook book;
  book.nu_ = law.num_actions();
  const std::uint64_t nu = book.nu_;
  book.codes_.resize(law.horizon());
  for (int t = 0; t < law.horizon(); ++t) {
    std::map<std::uint64_t, std::vector<double>> by_ctx;
    for (const auto& [code, p] : action_marginal(law, t)) {
      auto& v = by_ctx[code / nu];
      v.resize(nu, 0.0);
      v[code % nu] = p;
    }
    for (auto& [ctx, v] : by_ctx) {
      const double total = std::accumulate(v.begin(), v.end(), 0.0);
      if (!(total > 0.0)) continue;
      for (double& p : v) p /= total;
      book.codes_[t].emplace(ctx, PrefixCode(std::move(v)));
    }
  }
  return book;
}

bool ContextCodebook::has_context(int t, std::uint64_t context) const {
  return t >= 0 && t < horizon() && codes_[t].contains(context);
}

const PrefixCode& ContextCodebook::code(int t, std::uint64_t context) const {
  if (!has_context(t, context)) {
    std::ostringstream os;
    os << "no code for stage " << t << " context " << context;
    throw SpecError(os.str());
  }
  return codes_[t].at(context);
}

std::vector<double> ContextCodebook::expected_lengths(const JointLaw& law) const {
  if (law.horizon() != horizon() || law.num_actions() != nu_) {
    throw SpecError("law does not match the codebook dimensions");
  }
  std::vector<double> out(horizon(), 0.0);
  for (int t = 0; t < horizon(); ++t) {
    for (const auto& [code, p] : action_marginal(law, t)) {
      const auto& c = this->code(t, code / nu_);
      out[t] += p * c.length(static_cast<int>(code % nu_));
    }
  }
  return out;
}

}  // namespace ratecost
