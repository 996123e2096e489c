#include <gtest/gtest.h>

#include "gca/error.hpp"
#include "gca/plans.hpp"

using namespace gca;

TEST(IdentityPlan, Basic) {
  const TargetPlan p = identity_plan(3);
  EXPECT_EQ(p.values(), DenseMatrix::identity(3));
  EXPECT_DOUBLE_EQ(p.mass(), 3.0);
  EXPECT_THROW(identity_plan(1), Error);
}

TEST(BlockPlan, TwoDomainExample) {
  const TargetPlan p = block_domain_plan({0, 0, 1, 1}, 0.5, 0.0);
  const DenseMatrix raw{{1, 0.5, 0, 0}, {0.5, 1, 0, 0}, {0, 0, 1, 0.5}, {0, 0, 0.5, 1}};
  for (std::size_t n = 0; n < raw.size(); ++n) EXPECT_NEAR(p.values().data()[n], raw.data()[n] * 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(total(p.values()), 4.0, 1e-14);
  EXPECT_DOUBLE_EQ(p.mass(), 4.0);

  const TargetPlan r = block_domain_plan({0, 0, 1, 1}, 0.5, 0.0, false);
  EXPECT_EQ(r.values(), raw);
  EXPECT_DOUBLE_EQ(r.mass(), 6.0);
}

TEST(BlockPlan, CrossDomainWeight) {
  const TargetPlan r = block_domain_plan({0, 1, 0}, 0.25, 0.1, false);
  EXPECT_DOUBLE_EQ(r.values()(0, 2), 0.25);
  EXPECT_DOUBLE_EQ(r.values()(0, 1), 0.1);
  EXPECT_DOUBLE_EQ(r.values()(1, 1), 1.0);
}

TEST(BlockPlan, ZeroWeightsGiveIdentity) {
  const TargetPlan p = block_domain_plan({0, 1, 1, 0, 2}, 0.0, 0.0);
  EXPECT_EQ(p.values(), DenseMatrix::identity(5));
}

TEST(BlockPlan, RejectsNegativeWeights) {
  EXPECT_THROW(block_domain_plan({0, 1}, -0.1, 0.0), Error);
  EXPECT_THROW(block_domain_plan({0, 1}, 0.0, -0.1), Error);
}

TEST(TargetPlan, Validation) {
  EXPECT_THROW(TargetPlan(DenseMatrix{{1, -0.1}, {0, 1}}, 2.0), Error);
  EXPECT_THROW(TargetPlan(DenseMatrix{{1, 0}, {0, 0}}, 2.0), Error);
  EXPECT_THROW(TargetPlan(DenseMatrix(2, 3, 1.0), 2.0), Error);
}

TEST(NormalizePlan, HitsMass) {
  const TargetPlan p = normalize_plan(DenseMatrix{{2, 1}, {1, 4}}, 2.0);
  EXPECT_NEAR(total(p.values()), 2.0, 1e-15);
  EXPECT_NEAR(p.values()(1, 1), 1.0, 1e-15);
}

TEST(BlockPlan, EqualWeightsIgnoreDomains) {
  const TargetPlan a = block_domain_plan({0, 0, 1, 2, 1}, 0.3, 0.3);
  const TargetPlan b = block_domain_plan({4, 7, 7, 1, 3}, 0.3, 0.3);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NEAR(a.values()(0, 1), a.values()(2, 3), 1e-15);
  EXPECT_NEAR(a.values()(1, 1) * 0.3, a.values()(1, 4), 1e-15);
}

TEST(BlockPlan, SymmetricAndKeepsRowArgmax) {
  const std::vector<int> doms{0, 1, 1, 2, 0, 2, 1};
  for (double alpha : {0.0, 0.4, 2.0}) {
    for (double beta : {0.0, 0.1, 0.7}) {
      const TargetPlan raw = block_domain_plan(doms, alpha, beta, false);
      const TargetPlan p = block_domain_plan(doms, alpha, beta);
      for (std::size_t i = 0; i < doms.size(); ++i) {
        std::size_t am_raw = 0, am = 0;
        for (std::size_t j = 0; j < doms.size(); ++j) {
          EXPECT_EQ(p.values()(i, j), p.values()(j, i));
          if (raw.values()(i, j) > raw.values()(i, am_raw)) am_raw = j;
          if (p.values()(i, j) > p.values()(i, am)) am = j;
        }
        EXPECT_EQ(am, am_raw);
      }
    }
  }
}

TEST(NormalizePlan, Examples) {
  EXPECT_EQ(normalize_plan(DenseMatrix::identity(4), 4.0).values(), DenseMatrix::identity(4));
  const TargetPlan ones = normalize_plan(DenseMatrix(3, 3, 1.0), 3.0);
  for (double x : ones.values().data()) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  const TargetPlan twice = normalize_plan(ones.values(), 3.0);
  for (std::size_t n = 0; n < 9; ++n) EXPECT_NEAR(twice.values().data()[n], ones.values().data()[n], 1e-15);
}
