#pragma once

#include <cstdint>
#include <vector>

#include "birnn/compartmental_model.hpp"

namespace birnn {

inline constexpr int kMinutesPerDay = 1440;

struct MealEvent {
    int start = 0;       // minute of day
    double size = 0.0;   // g
    int duration = 0;    // min

    bool operator==(const MealEvent&) const = default;
};

struct BolusEvent {
    long time = 0;              // absolute minute
    double amount = 0.0;        // U
    int delay_after_meal = 0;   // min

    bool operator==(const BolusEvent&) const = default;
};

struct ScenarioConfig {
    int days = 1;
    std::vector<MealEvent> nominal_meals;
    int time_jitter = 0;          // +/- min
    double size_jitter = 0.0;     // +/- fraction of nominal size
    int duration_jitter = 0;      // +/- min
    double carb_ratio = 10.0;     // g/U
    double bolus_error_range = 0.0;
    int bolus_delay_min = 5;
    int bolus_delay_max = 30;
    double basal_rate = 0.0;      // U/min
    int bolus_duration = 1;       // min over which a bolus is spread
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const ScenarioConfig&) const = default;
};

// A realized meal plus the draws that produced it.
struct RealizedMeal {
    MealEvent event;          // start is minute of day
    long absolute_start = 0;
    int day = 0;
    MealEvent nominal;
    int time_offset = 0;
    double size_factor = 1.0;
    int duration_offset = 0;
    int redraws = 0;          // rejected schedules for this day

    bool operator==(const RealizedMeal&) const = default;
};

struct RealizedBolus {
    BolusEvent event;
    std::size_t meal = 0;         // index into meal_log
    double perceived_size = 0.0;  // g, the miscalculated meal estimate
    double estimate_factor = 1.0;

    bool operator==(const RealizedBolus&) const = default;
};

struct Scenario {
    std::vector<ModelInput> inputs;  // one entry per minute
    std::vector<RealizedMeal> meal_log;
    std::vector<RealizedBolus> bolus_log;

    bool operator==(const Scenario&) const = default;
};

Scenario generate_scenario(const ScenarioConfig& config);

struct Protocols {
    ScenarioConfig train;
    ScenarioConfig validation;
    ScenarioConfig test;
};

// Three-meal template (07:00 60 g/30 min, 12:00 60 g/30 min, 18:00 80 g/40 min)
// with +/-20 min, +/-20 %, +/-10 min jitter; 14/14/7 days, distinct seeds.
Protocols nominal_protocols();

} // namespace birnn
