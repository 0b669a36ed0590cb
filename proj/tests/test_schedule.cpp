#include <doctest.h>

#include <cmath>

#include "safepatch/schedule.hpp"
#include "safepatch/error.hpp"

using namespace safepatch;

TEST_SUITE_BEGIN("schedule");

TEST_CASE("two-step schedule by hand") {
    NoiseSchedule s = make_schedule(2, 0.1, 0.2);
    CHECK(s.beta(1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.beta(2) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(s.alpha(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha(2) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.72).epsilon(1e-15));
}

TEST_CASE("single step") {
    NoiseSchedule s = make_schedule(1, 0.05, 0.05);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("endpoint validation") {
    CHECK_THROWS_AS(make_schedule(10, 1e-4, 1.0), InvalidConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), InvalidConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.5, 0.1), InvalidConfigError);
    CHECK_THROWS_AS(make_schedule(0, 1e-4, 0.02), InvalidConfigError);
}

TEST_CASE("default schedule invariants") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    double bar = 1.0;
    for (int t = 1; t <= 100; ++t) {
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        bar *= 1.0 - s.beta(t);
        CHECK(std::abs(s.alpha_bar(t) - bar) <= 1e-12);
        if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
    CHECK(s.alpha_bar(100) < s.alpha_bar(1));
    CHECK(s.alpha_bar(1) < 1.0);
}

TEST_SUITE_END();
