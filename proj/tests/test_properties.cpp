#include "doctest.h"
#include "properties.hpp"

// Run alone with: unit_tests -ts=properties
TEST_SUITE("properties") {
  TEST_CASE("band boundaries are ordered and monotone") {
    const auto r = props::monotone_and_ordered();
    INFO(r.detail);
    CHECK(r.ok);
  }
  TEST_CASE("C1 and C2 are exhaustive") {
    const auto r = props::exhaustive_c1_c2();
    INFO(r.detail);
    CHECK(r.ok);
  }
  TEST_CASE("C3 is not comprehensive") {
    const auto r = props::c3_noncomprehensive_witness();
    INFO(r.detail);
    CHECK(r.ok);
  }
  TEST_CASE("B3 admits cdfs from outside C3") {
    const auto r = props::b3_inflation_witness();
    INFO(r.detail);
    CHECK(r.ok);
  }
  TEST_CASE("trimmed bands nest") {
    const auto r = props::nesting();
    INFO(r.detail);
    CHECK(r.ok);
  }
  TEST_CASE("reliability transform is an involution") {
    const auto r = props::reliability_involution();
    INFO(r.detail);
    CHECK(r.ok);
  }
  TEST_CASE("marginal map H") {
    const auto r = props::h_properties();
    INFO(r.detail);
    CHECK(r.ok);
  }
}
