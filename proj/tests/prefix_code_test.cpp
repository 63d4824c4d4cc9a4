#include "ratecost/prefix_code.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ratecost/error.hpp"
#include "support.hpp"

namespace ratecost {
namespace {

Bits B(const char* s) {
  Bits out;
  for (; *s; ++s) out.push_back(*s == '1');
  return out;
}

// Smallest L with 2^-L <= p, by exact power-of-two comparison.
int ShannonLengthOracle(double p) {
  int len = 0;
  while (std::ldexp(1.0, -len) > p) ++len;
  return len;
}

bool IsPrefix(const Bits& a, const Bits& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

void ExpectPrefixFree(const PrefixCode& code) {
  const int nu = static_cast<int>(code.pmf().size());
  for (int a = 0; a < nu; ++a) {
    if (!code.has_symbol(a)) continue;
    for (int b = 0; b < nu; ++b) {
      if (a == b || !code.has_symbol(b)) continue;
      EXPECT_FALSE(IsPrefix(code.codeword(a), code.codeword(b))) << a << " vs " << b;
    }
  }
}

TEST(PrefixCode, UniformOverFour) {
  const PrefixCode code({0.25, 0.25, 0.25, 0.25});
  EXPECT_EQ(code.codeword(0), B("00"));
  EXPECT_EQ(code.codeword(1), B("01"));
  EXPECT_EQ(code.codeword(2), B("10"));
  EXPECT_EQ(code.codeword(3), B("11"));
  EXPECT_EQ(code.expected_length(), 2.0);
  EXPECT_EQ(code.entropy(), 2.0);
  EXPECT_EQ(code.kraft_sum(), 1.0);
}

TEST(PrefixCode, DyadicPmfIsComplete) {
  const PrefixCode code({0.5, 0.25, 0.25});
  EXPECT_EQ(code.codeword(0), B("0"));
  EXPECT_EQ(code.codeword(1), B("10"));
  EXPECT_EQ(code.codeword(2), B("11"));
  EXPECT_EQ(code.expected_length(), 1.5);
  EXPECT_EQ(code.entropy(), 1.5);
  EXPECT_EQ(code.kraft_sum(), 1.0);
}

TEST(PrefixCode, SkewedPairUsesShannonLengths) {
  const PrefixCode code({0.9, 0.1});
  EXPECT_EQ(code.length(0), 1);
  EXPECT_EQ(code.length(1), 4);
  EXPECT_EQ(code.codeword(0), B("0"));
  EXPECT_EQ(code.codeword(1), B("1000"));
  EXPECT_NEAR(code.expected_length(), 1.3, 1e-15);
  EXPECT_EQ(code.kraft_sum(), 0.5625);
  EXPECT_LE(code.expected_length(), code.entropy() + 1.0);
}

TEST(PrefixCode, LargerSymbolFirstWithTiesByIndex) {
  const PrefixCode code({0.1, 0.6, 0.3});
  EXPECT_EQ(code.codeword(1), B("0"));
  EXPECT_EQ(code.codeword(2), B("10"));
  EXPECT_EQ(code.codeword(0), B("1100"));
  const PrefixCode tied({0.25, 0.5, 0.25});
  EXPECT_EQ(tied.codeword(1), B("0"));
  EXPECT_EQ(tied.codeword(0), B("10"));
  EXPECT_EQ(tied.codeword(2), B("11"));
}

TEST(PrefixCode, PointMassHasAnEmptyCodeword) {
  const PrefixCode code({0.0, 1.0, 0.0});
  EXPECT_TRUE(code.codeword(1).empty());
  EXPECT_FALSE(code.has_symbol(0));
  EXPECT_EQ(code.expected_length(), 0.0);
  BitWriter w;
  code.encode(1, w);
  code.encode(1, w);
  EXPECT_EQ(w.bit_count(), 0u);
  BitReader r(w.bytes(), w.bit_count());
  EXPECT_EQ(code.decode(r), 1);
  EXPECT_TRUE(r.exhausted());
}

TEST(PrefixCode, RejectsBadInput) {
  EXPECT_THROW(PrefixCode(std::vector<double>{}), SpecError);
  EXPECT_THROW(PrefixCode({0.5, 0.6}), SpecError);
  EXPECT_THROW(PrefixCode({-0.1, 1.1}), SpecError);
  EXPECT_THROW(PrefixCode({NAN, 1.0}), SpecError);
  const PrefixCode code({0.9, 0.0, 0.1});
  BitWriter w;
  EXPECT_THROW(code.encode(1, w), SpecError);
  EXPECT_THROW(code.encode(7, w), SpecError);
  EXPECT_THROW(code.length(1), SpecError);
}

TEST(PrefixCode, MalformedAndTruncatedStreams) {
  const PrefixCode code({0.9, 0.1});
  BitWriter w;
  w.put(B("11"));
  BitReader malformed(w.bytes(), w.bit_count());
  EXPECT_THROW(code.decode(malformed), VerificationError);

  BitWriter t;
  t.put(B("100"));
  BitReader truncated(t.bytes(), t.bit_count());
  EXPECT_THROW(code.decode(truncated), VerificationError);

  BitReader empty(t.bytes(), 0);
  EXPECT_THROW(code.decode(empty), VerificationError);
}

TEST(ShannonLength, MatchesExactPowerComparison) {
  Rng rng(60);
  for (int k = 0; k < 60; ++k) {
    const double p = std::ldexp(1.0, -k);
    EXPECT_EQ(shannon_length(p), k);
    EXPECT_EQ(shannon_length(std::nextafter(p, 0.0)), k + 1);
    if (k > 0) {
      EXPECT_EQ(shannon_length(std::nextafter(p, 1.0)), k);
    }
  }
  for (int trial = 0; trial < 100000; ++trial) {
    const double p = std::pow(rng.uniform(), 1.0 + 20.0 * rng.uniform());
    if (!(p > 0.0)) continue;
    ASSERT_EQ(shannon_length(p), ShannonLengthOracle(p)) << p;
    ASSERT_EQ(shannon_length(p), static_cast<int>(std::ceil(-std::log2(p)))) << p;
  }
  EXPECT_THROW(shannon_length(0.0), SpecError);
  EXPECT_THROW(shannon_length(1.5), SpecError);
}

TEST(PrefixCode, RandomPmfsMeetKraftAndTheOneBitBound) {
  Rng rng(61);
  for (int trial = 0; trial < 5000; ++trial) {
    const int nu = 1 + static_cast<int>(rng.next() % 12);
    const auto pmf = testing::random_pmf(rng, nu, 0.2);
    const PrefixCode code(pmf);
    EXPECT_LE(code.kraft_sum(), 1.0);
    EXPECT_LE(code.expected_length(), code.entropy() + 1.0);
    EXPECT_GE(code.expected_length(), code.entropy() - 1e-12);
    double expected = 0.0, kraft = 0.0;
    for (int u = 0; u < nu; ++u) {
      EXPECT_EQ(code.has_symbol(u), pmf[u] > 0.0);
      if (pmf[u] == 0.0) continue;
      EXPECT_EQ(code.length(u), ShannonLengthOracle(pmf[u]));
      EXPECT_EQ(static_cast<int>(code.codeword(u).size()), code.length(u));
      expected += pmf[u] * code.length(u);
      kraft += std::ldexp(1.0, -code.length(u));
    }
    EXPECT_NEAR(code.expected_length(), expected, 1e-12);
    EXPECT_EQ(code.kraft_sum(), kraft);
    ExpectPrefixFree(code);
  }
}

TEST(PrefixCode, LengthsFollowSymbolsUnderPermutation) {
  Rng rng(62);
  for (int trial = 0; trial < 500; ++trial) {
    const int nu = 2 + static_cast<int>(rng.next() % 8);
    const auto pmf = testing::random_pmf(rng, nu, 0.1);
    std::vector<int> perm(nu);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = nu - 1; i > 0; --i) std::swap(perm[i], perm[rng.next() % (i + 1)]);
    std::vector<double> permuted(nu);
    for (int u = 0; u < nu; ++u) permuted[perm[u]] = pmf[u];
    const PrefixCode a(pmf), b(permuted), again(pmf);
    for (int u = 0; u < nu; ++u) {
      if (pmf[u] == 0.0) continue;
      EXPECT_EQ(a.length(u), b.length(perm[u]));
      EXPECT_EQ(a.codeword(u), again.codeword(u));
    }
    EXPECT_NEAR(a.expected_length(), b.expected_length(), 1e-12);
  }
}

TEST(PrefixCode, ConcatenatedStreamRoundTrips) {
  Rng rng(63);
  for (int trial = 0; trial < 50; ++trial) {
    const int nu = 1 + static_cast<int>(rng.next() % 9);
    const auto pmf = testing::random_pmf(rng, nu, 0.3);
    const PrefixCode code(pmf);
    std::vector<int> sent;
    BitWriter w;
    for (int i = 0; i < 1000; ++i) {
      double x = rng.uniform();
      int u = 0;
      while (u + 1 < nu && (x >= pmf[u] || pmf[u] == 0.0)) x -= pmf[u++];
      if (pmf[u] == 0.0) continue;
      sent.push_back(u);
      code.encode(u, w);
    }
    BitReader r(w.bytes(), w.bit_count());
    for (int u : sent) ASSERT_EQ(code.decode(r), u);
    EXPECT_TRUE(r.exhausted());
    EXPECT_EQ(w.bytes().size(), (w.bit_count() + 7) / 8);
  }
}

TEST(BitStream, MostSignificantBitFirstWithZeroPadding) {
  BitWriter w;
  w.put(B("101"));
  ASSERT_EQ(w.bytes().size(), 1u);
  EXPECT_EQ(w.bytes()[0], 0b10100000);
  w.put(B("00001111"));
  ASSERT_EQ(w.bytes().size(), 2u);
  EXPECT_EQ(w.bytes()[0], 0b10100001);
  EXPECT_EQ(w.bytes()[1], 0b11100000);
  BitReader r(w.bytes(), w.bit_count());
  Bits back;
  while (!r.exhausted()) back.push_back(r.get());
  EXPECT_EQ(back, B("10100001111"));
  EXPECT_THROW(r.get(), VerificationError);
}

TEST(ContextCodebook, StagewiseBoundsAgainstTheOracle) {
  Rng rng(64);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 3, nx = 2 + trial % 2, nu = 2 + (trial / 2) % 2;
    const auto spec = testing::random_markov(rng, n, nx, nu);
    const auto policy = testing::random_policy(rng, n, nx, nu, 0.2);
    const JointLaw law = evaluate_joint(spec, policy);
    const auto book = ContextCodebook::build(law);
    ASSERT_EQ(book.horizon(), n);
    const auto lengths = book.expected_lengths(law);

    const auto table = testing::oracle_table(spec, [&](int t, const oracle::Path& prefix) {
      std::vector<int> xs, us;
      testing::split_prefix(prefix, xs, us);
      std::vector<double> row(nu);
      for (int u = 0; u < nu; ++u) {
        row[u] = policy.row(t, testing::join_row(xs, us, nx, nu))[u];
      }
      return row;
    });
    const auto h = oracle::conditional_action_entropies(table, n);
    double total = 0.0;
    for (int t = 0; t < n; ++t) {
      EXPECT_LE(lengths[t], h[t] + 1.0 + 1e-12) << "stage " << t;
      EXPECT_GE(lengths[t], h[t] - 1e-12);
      total += lengths[t];
      for (const auto& [ctx, code] : book.stage(t)) EXPECT_LE(code.kraft_sum(), 1.0);
    }
    EXPECT_LE(total, oracle::action_entropy(table, n) + n + 1e-12);
  }
}

TEST(ContextCodebook, UnreachableContextsAreRejected) {
  // u_0 is always 0, so the stage-1 context u_0 = 1 never occurs.
  const auto spec = SystemSpec::markov(2, 2, 2, {0.5, 0.5}, std::vector<double>(8, 0.5),
                                       {0.0, 1.0, 1.0, 0.0});
  const auto policy = testing::fill_policy(2, 2, 2, [](int t, const std::vector<int>& xs,
                                                       const std::vector<int>&) {
    if (t == 0) return std::vector<double>{1.0, 0.0};
    return xs[1] == 0 ? std::vector<double>{0.75, 0.25} : std::vector<double>{0.25, 0.75};
  });
  const JointLaw law = evaluate_joint(spec, policy);
  const auto book = ContextCodebook::build(law);
  EXPECT_TRUE(book.has_context(1, 0));
  EXPECT_FALSE(book.has_context(1, 1));
  EXPECT_THROW(book.code(1, 1), SpecError);
  EXPECT_TRUE(book.code(0, 0).codeword(0).empty());
  const auto lengths = book.expected_lengths(law);
  EXPECT_EQ(lengths[0], 0.0);
  EXPECT_EQ(lengths[1], 1.0);

  // A law that puts mass where the codebook has no codeword.
  const JointLaw other = evaluate_joint(spec, testing::fill_policy(
      2, 2, 2, [](int, const std::vector<int>&, const std::vector<int>&) {
        return std::vector<double>{0.5, 0.5};
      }));
  EXPECT_THROW(book.expected_lengths(other), SpecError);
}

}  // namespace
}  // namespace ratecost
