#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "birnn/error.hpp"
#include "birnn/rng.hpp"
#include "birnn/scenario.hpp"
#include "test_support.hpp"

using namespace birnn;

TEST(Rng, KnownSplitmixSequence)
{
    // Reference values of splitmix64 seeded with 0.
    std::uint64_t state = 0;
    EXPECT_EQ(splitmix64(state), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(splitmix64(state), 0x6e789e6aa1b965f4ULL);
    EXPECT_EQ(splitmix64(state), 0x06c45d188009454fULL);
}

TEST(Rng, UniformIntCoversClosedRange)
{
    Rng rng(5);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = rng.uniform_int(-3, 3);
        ASSERT_GE(v, -3);
        ASSERT_LE(v, 3);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, SampleWithoutReplacementIsSortedAndDistinct)
{
    Rng rng(9);
    const auto idx = rng.sample_without_replacement(100, 37);
    ASSERT_EQ(idx.size(), 37u);
    for (std::size_t i = 1; i < idx.size(); ++i)
        EXPECT_LT(idx[i - 1], idx[i]);
    EXPECT_LT(idx.back(), 100u);
    EXPECT_EQ(rng.sample_without_replacement(10, 10).size(), 10u);
}

TEST(Rng, DerivedSeedsDiffer)
{
    EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
    EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
    EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
}

TEST(Scenario, ValidationProtocolHasFortyTwoMeals)
{
    const Protocols p = nominal_protocols();
    const std::vector<MealEvent> meals{{420, 60.0, 30}, {720, 60.0, 30}, {1080, 80.0, 40}};
    EXPECT_EQ(p.validation.nominal_meals, meals);
    EXPECT_EQ(p.validation.days, 14);
    EXPECT_EQ(p.train.days, 14);
    EXPECT_EQ(p.test.days, 7);
    EXPECT_EQ(p.validation.time_jitter, 20);
    EXPECT_EQ(p.validation.size_jitter, 0.2);
    EXPECT_EQ(p.validation.duration_jitter, 10);
    EXPECT_NE(p.train.seed, p.validation.seed);
    EXPECT_NE(p.train.seed, p.test.seed);
    EXPECT_NE(p.validation.seed, p.test.seed);

    const Scenario sc = generate_scenario(p.validation);
    EXPECT_EQ(sc.inputs.size(), 20160u);
    EXPECT_EQ(sc.meal_log.size(), 42u);
    EXPECT_EQ(sc.bolus_log.size(), 42u);
}

TEST(Scenario, ZeroJitterReproducesNominalEvents)
{
    ScenarioConfig c = birnn::testing::one_day(1, 2);
    c.time_jitter = 0;
    c.size_jitter = 0.0;
    c.duration_jitter = 0;
    c.bolus_error_range = 0.0;
    c.bolus_delay_min = c.bolus_delay_max = 5;
    const Scenario sc = generate_scenario(c);
    ASSERT_EQ(sc.meal_log.size(), 6u);
    for (std::size_t i = 0; i < sc.meal_log.size(); ++i) {
        const auto& m = sc.meal_log[i];
        EXPECT_EQ(m.event, c.nominal_meals[i % 3]);
        EXPECT_EQ(m.absolute_start, static_cast<long>(i / 3) * 1440 + c.nominal_meals[i % 3].start);
        const auto& b = sc.bolus_log[i];
        EXPECT_EQ(b.event.amount, m.event.size / c.carb_ratio);
        EXPECT_EQ(b.event.time, m.absolute_start + 5);
    }
}

TEST(Scenario, SameSeedIsIdentical)
{
    const ScenarioConfig c = birnn::testing::one_day(77, 3);
    EXPECT_EQ(generate_scenario(c), generate_scenario(c));
    ScenarioConfig d = c;
    d.seed = 78;
    EXPECT_NE(generate_scenario(c).inputs, generate_scenario(d).inputs);
}

TEST(Scenario, JitterBoundsHoldOverManySeeds)
{
    ScenarioConfig c = birnn::testing::one_day(0);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        c.seed = seed;
        const Scenario sc = generate_scenario(c);
        for (const auto& m : sc.meal_log) {
            ASSERT_LE(std::abs(m.event.start - m.nominal.start), c.time_jitter);
            ASSERT_LE(std::abs(m.event.size / m.nominal.size - 1.0), c.size_jitter + 1e-12);
            ASSERT_LE(std::abs(m.event.duration - m.nominal.duration), c.duration_jitter);
        }
        for (const auto& b : sc.bolus_log) {
            ASSERT_GE(b.event.delay_after_meal, 5);
            ASSERT_LE(b.event.delay_after_meal, 30);
            ASSERT_GE(b.event.amount, 0.0);
            ASSERT_LE(std::abs(b.estimate_factor - 1.0), c.bolus_error_range);
        }
    }
}

TEST(Scenario, MealAndBolusMassIsConserved)
{
    const ScenarioConfig c = birnn::testing::one_day(123, 5);
    const Scenario sc = generate_scenario(c);
    for (const auto& m : sc.meal_log) {
        double carbs = 0.0;
        for (int k = 0; k < m.event.duration; ++k)
            carbs += sc.inputs[static_cast<std::size_t>(m.absolute_start + k)].r;
        EXPECT_NEAR(carbs, m.event.size, 1e-9);
    }
    for (const auto& b : sc.bolus_log) {
        double insulin = 0.0;
        for (int k = 0; k < c.bolus_duration; ++k)
            insulin += sc.inputs[static_cast<std::size_t>(b.event.time + k)].u - c.basal_rate;
        EXPECT_NEAR(insulin, b.event.amount, 1e-9);
    }
    double total_r = 0.0;
    for (const auto& in : sc.inputs) {
        EXPECT_GE(in.u, c.basal_rate);
        EXPECT_GE(in.r, 0.0);
        total_r += in.r;
    }
    double meals = 0.0;
    for (const auto& m : sc.meal_log)
        meals += m.event.size;
    EXPECT_NEAR(total_r, meals, 1e-9);
}

TEST(Scenario, CoincidentMealsAreUnsatisfiable)
{
    ScenarioConfig c = birnn::testing::one_day(1);
    c.nominal_meals = {{600, 50.0, 30}, {610, 50.0, 30}};
    c.time_jitter = 0;
    try {
        generate_scenario(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnsatisfiableSchedule);
    }
}

TEST(Scenario, InvalidConfigsAreRejected)
{
    ScenarioConfig c = birnn::testing::one_day(1);
    c.bolus_delay_min = 3;
    EXPECT_THROW(generate_scenario(c), Error);
    c = birnn::testing::one_day(1);
    c.days = 0;
    EXPECT_THROW(generate_scenario(c), Error);
    c = birnn::testing::one_day(1);
    c.time_jitter = -1;
    EXPECT_THROW(generate_scenario(c), Error);
}
