#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "pcreg/gradcheck.hpp"

using namespace pcreg;

TEST_CASE("every primitive and the full model pass at the default tolerance") {
    const auto checks = run_gradient_checks(7);
    CHECK(all_passed(checks));

    const char* expected[] = {
        "matmul",       "bias_add",    "relu",
        "sigmoid",      "tanh",        "concat_cols",
        "slice_cols",   "gather_rows", "segment_max",
        "max_pool_set", "scale",       "add",
        "sub",          "sum",         "mean_squared_norm",
        "l2_normalize_rows", "toy_model_loss"};
    REQUIRE(checks.size() == std::size(expected));
    for (std::size_t i = 0; i < checks.size(); ++i) {
        CHECK(checks[i].name == expected[i]);
        CHECK(checks[i].passed);
        CHECK(checks[i].max_rel_error < 1e-5);
        CHECK(checks[i].elements > 0);
    }
    const auto* toy = &checks.back();
    CHECK(toy->elements == 2184);
}

TEST_CASE("results are deterministic in the seed") {
    const auto a = run_gradient_checks(123);
    const auto b = run_gradient_checks(123);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].max_rel_error == b[i].max_rel_error);
    }
}

TEST_CASE("an unattainable tolerance flips every verdict") {
    const auto checks = run_gradient_checks(7, 1e-300);
    CHECK_FALSE(all_passed(checks));
    for (const GradCheck& c : checks) CHECK_FALSE(c.passed);
}
