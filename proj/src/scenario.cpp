#include "birnn/scenario.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "birnn/error.hpp"
#include "birnn/rng.hpp"

namespace birnn {

namespace {

constexpr int kMaxRedraws = 100;

void require(bool cond, const char* msg)
{
    if (!cond)
        throw Error(ErrorKind::InvalidConfig, msg);
}

} // namespace

void ScenarioConfig::validate() const
{
    require(days >= 1, "days must be >= 1");
    require(time_jitter >= 0 && duration_jitter >= 0 && size_jitter >= 0, "jitters must be non-negative");
    require(size_jitter < 1.0, "size_jitter must be below 1");
    require(carb_ratio > 0, "carb_ratio must be positive");
    require(bolus_error_range >= 0 && bolus_error_range < 1.0, "bolus_error_range must be in [0, 1)");
    require(bolus_delay_min >= 5 && bolus_delay_min <= bolus_delay_max && bolus_delay_max <= 30,
            "bolus delay range must satisfy 5 <= min <= max <= 30");
    require(basal_rate >= 0, "basal_rate must be non-negative");
    require(bolus_duration >= 1, "bolus_duration must be >= 1");
    for (const auto& m : nominal_meals) {
        require(m.size > 0 && m.duration > 0, "meal size and duration must be positive");
        require(m.start >= 0 && m.start + m.duration <= kMinutesPerDay, "meal must fit within its day");
        require(m.duration - duration_jitter > 0, "duration jitter can produce empty meals");
        require(m.start + time_jitter + bolus_delay_max + bolus_duration <= kMinutesPerDay,
                "latest bolus of a meal would fall past midnight");
    }
}

Scenario generate_scenario(const ScenarioConfig& config)
{
    config.validate();
    Rng rng(config.seed);

    const long total = static_cast<long>(config.days) * kMinutesPerDay;
    Scenario sc;
    sc.inputs.assign(static_cast<std::size_t>(total), ModelInput{config.basal_rate, 0.0});

    for (int day = 0; day < config.days; ++day) {
        std::vector<RealizedMeal> meals;
        int redraws = 0;
        for (;; ++redraws) {
            if (redraws >= kMaxRedraws) {
                std::ostringstream os;
                os << "no non-overlapping meal schedule for day " << day << " after " << kMaxRedraws
                   << " draws";
                throw Error(ErrorKind::UnsatisfiableSchedule, os.str());
            }
            meals.clear();
            for (const auto& nominal : config.nominal_meals) {
                RealizedMeal m;
                m.day = day;
                m.nominal = nominal;
                m.time_offset = static_cast<int>(rng.uniform_int(-config.time_jitter, config.time_jitter));
                m.size_factor = rng.uniform(1.0 - config.size_jitter, 1.0 + config.size_jitter);
                m.duration_offset =
                    static_cast<int>(rng.uniform_int(-config.duration_jitter, config.duration_jitter));
                m.event.start = nominal.start + m.time_offset;
                m.event.size = nominal.size * m.size_factor;
                m.event.duration = nominal.duration + m.duration_offset;
                meals.push_back(m);
            }
            std::sort(meals.begin(), meals.end(),
                      [](const RealizedMeal& a, const RealizedMeal& b) { return a.event.start < b.event.start; });
            bool ok = true;
            for (std::size_t i = 0; i < meals.size() && ok; ++i) {
                const auto& e = meals[i].event;
                ok = e.start >= 0 && e.start + e.duration <= kMinutesPerDay;
                if (ok && i + 1 < meals.size())
                    ok = e.start + e.duration <= meals[i + 1].event.start;
            }
            if (ok)
                break;
        }

        for (auto& m : meals) {
            m.redraws = redraws;
            m.absolute_start = static_cast<long>(day) * kMinutesPerDay + m.event.start;
            const double rate = m.event.size / m.event.duration;
            for (int k = 0; k < m.event.duration; ++k)
                sc.inputs[static_cast<std::size_t>(m.absolute_start + k)].r += rate;

            RealizedBolus b;
            b.meal = sc.meal_log.size();
            b.estimate_factor = rng.uniform(1.0 - config.bolus_error_range, 1.0 + config.bolus_error_range);
            b.perceived_size = m.event.size * b.estimate_factor;
            b.event.amount = b.perceived_size / config.carb_ratio;
            b.event.delay_after_meal =
                static_cast<int>(rng.uniform_int(config.bolus_delay_min, config.bolus_delay_max));
            b.event.time = m.absolute_start + b.event.delay_after_meal;
            const double per_minute = b.event.amount / config.bolus_duration;
            for (int k = 0; k < config.bolus_duration; ++k)
                sc.inputs[static_cast<std::size_t>(b.event.time + k)].u += per_minute;

            sc.meal_log.push_back(m);
            sc.bolus_log.push_back(b);
        }
    }
    return sc;
}

Protocols nominal_protocols()
{
    ScenarioConfig base;
    base.nominal_meals = {{7 * 60, 60.0, 30}, {12 * 60, 60.0, 30}, {18 * 60, 80.0, 40}};
    base.time_jitter = 20;
    base.size_jitter = 0.20;
    base.duration_jitter = 10;
    base.carb_ratio = 10.0;
    base.bolus_error_range = 0.3;
    base.bolus_delay_min = 5;
    base.bolus_delay_max = 30;
    base.basal_rate = 0.015;

    Protocols p{base, base, base};
    p.train.days = 14;
    p.train.seed = 1001;
    p.validation.days = 14;
    p.validation.seed = 2002;
    p.test.days = 7;
    p.test.seed = 3003;
    return p;
}

} // namespace birnn
