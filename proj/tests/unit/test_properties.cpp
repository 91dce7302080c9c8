#include <doctest.h>

#include "../common/criteria.hpp"

using namespace testsupport;

namespace {

void expect(const InvariantResult& r) {
  INFO(r.name, ": ", r.failures, " of ", r.cases, " failed; first ", r.first_failure);
  CHECK(r.cases >= 100);
  CHECK(r.failures == 0);
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("pi, lambda and softmax rows are normalized") { expect(invariant_normalization(100, 1)); }
TEST_CASE("observed cells never change") { expect(invariant_observed_cells_fixed(100, 1)); }
TEST_CASE("Gini monotonicity") { expect(invariant_gini_monotone(200, 1)); }
TEST_CASE("pooling permutation invariance") { expect(invariant_pooling_permutation(200, 1)); }
TEST_CASE("estimand filter compliance") { expect(invariant_estimand_filter(100, 1)); }

}
