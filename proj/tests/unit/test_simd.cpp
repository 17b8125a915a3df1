#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mgcs/common/rng.hpp"
#include "mgcs/simd/kernels.hpp"

namespace {

using mgcs::simd::Isa;

std::vector<double> random_vec(mgcs::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Avx2, Isa::Neon})
    if (mgcs::simd::isa_available(isa)) out.push_back(isa);
  return out;
}

void expect_close(double ref, double got, double scale) {
  EXPECT_NEAR(ref, got, 1e-12 * std::max(1.0, scale));
}

TEST(Simd, ScalarIsAlwaysAvailable) {
  EXPECT_TRUE(mgcs::simd::isa_available(Isa::Scalar));
  EXPECT_EQ(mgcs::simd::kernels_for(Isa::Scalar).isa, Isa::Scalar);
}

TEST(Simd, ParseIsaNames) {
  EXPECT_EQ(mgcs::simd::parse_isa("scalar"), Isa::Scalar);
  EXPECT_EQ(mgcs::simd::parse_isa("avx2"), Isa::Avx2);
  EXPECT_EQ(mgcs::simd::parse_isa("neon"), Isa::Neon);
  EXPECT_FALSE(mgcs::simd::parse_isa("sse9"));
}

TEST(Simd, UnavailableIsaThrows) {
  for (Isa isa : {Isa::Avx2, Isa::Neon})
    if (!mgcs::simd::isa_available(isa)) EXPECT_THROW(mgcs::simd::kernels_for(isa), std::invalid_argument);
}

TEST(Simd, ScalarReferenceValues) {
  const auto& k = mgcs::simd::kernels_for(Isa::Scalar);
  const double a[] = {1, 2}, b[] = {3, 4};
  EXPECT_EQ(k.dot(a, b, 2), 11.0);
  double y[] = {1, 1};
  k.axpy(2.0, a, y, 2);
  EXPECT_EQ(y[0], 3.0);
  EXPECT_EQ(y[1], 5.0);
  k.scale(0.5, y, 2);
  EXPECT_EQ(y[1], 2.5);
  EXPECT_EQ(k.sum(a, 2), 3.0);
  EXPECT_EQ(k.dot(a, b, 0), 0.0);
}

TEST(Simd, VectorVariantsMatchScalarOnAllTailLengths) {
  const auto& ref = mgcs::simd::kernels_for(Isa::Scalar);
  mgcs::Rng rng(7);
  for (Isa isa : vector_isas()) {
    const auto& k = mgcs::simd::kernels_for(isa);
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 33u, 128u, 1001u}) {
      SCOPED_TRACE(std::string(mgcs::simd::to_string(isa)) + " n=" + std::to_string(n));
      const auto a = random_vec(rng, n), b = random_vec(rng, n);
      expect_close(ref.dot(a.data(), b.data(), n), k.dot(a.data(), b.data(), n), static_cast<double>(n));
      expect_close(ref.sum(a.data(), n), k.sum(a.data(), n), static_cast<double>(n));

      auto y1 = b, y2 = b;
      ref.axpy(-0.7, a.data(), y1.data(), n);
      k.axpy(-0.7, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) expect_close(y1[i], y2[i], 1.0);

      auto s1 = a, s2 = a;
      ref.scale(1.3, s1.data(), n);
      k.scale(1.3, s2.data(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(s1[i], s2[i]);
    }
  }
}

TEST(Simd, DotRowsMatchesScalar) {
  const auto& ref = mgcs::simd::kernels_for(Isa::Scalar);
  mgcs::Rng rng(11);
  for (Isa isa : vector_isas()) {
    const auto& k = mgcs::simd::kernels_for(isa);
    for (std::size_t d : {1u, 3u, 4u, 13u, 128u}) {
      const std::size_t rows = 37;
      const auto q = random_vec(rng, d), m = random_vec(rng, rows * d);
      std::vector<double> o1(rows), o2(rows);
      ref.dot_rows(q.data(), m.data(), rows, d, o1.data());
      k.dot_rows(q.data(), m.data(), rows, d, o2.data());
      for (std::size_t r = 0; r < rows; ++r) {
        expect_close(o1[r], o2[r], static_cast<double>(d));
        expect_close(ref.dot(q.data(), m.data() + r * d, d), o1[r], static_cast<double>(d));
      }
    }
  }
}

TEST(Simd, SetActiveIsaSwitchesDispatch) {
  const Isa before = mgcs::simd::active_isa();
  mgcs::simd::set_active_isa(Isa::Scalar);
  EXPECT_EQ(mgcs::simd::kernels().isa, Isa::Scalar);
  const std::vector<double> a{1, 2, 3};
  EXPECT_EQ(mgcs::simd::dot(a, a), 14.0);
  mgcs::simd::set_active_isa(before);
  EXPECT_EQ(mgcs::simd::active_isa(), before);
}

}  // namespace
