#include <gtest/gtest.h>

#include "support/structural.hpp"

using namespace qpd;

class Structural : public ::testing::TestWithParam<std::size_t> {};

TEST_P(Structural, Invariants) {
  const auto cases = suite::structural_cases();
  const auto& sc = cases.at(GetParam());
  const auto r = suite::check_structure(sc);
  for (const auto& f : r.failures) ADD_FAILURE() << sc.name << ": " << f;
  EXPECT_TRUE(r.passed);
}

INSTANTIATE_TEST_SUITE_P(Builders, Structural, ::testing::Range<std::size_t>(0, 12));
