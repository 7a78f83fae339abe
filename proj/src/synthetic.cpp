#include "mcp/synthetic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace mcp {

ForcingSeries synthetic_forcing(const Date& start, std::size_t n_days, std::uint64_t seed,
                                const SyntheticClimate& c) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> depth(1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    ForcingSeries s;
    s.dates.reserve(n_days);
    const auto base = start.serial();
    for (std::size_t i = 0; i < n_days; ++i) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / 365.25;
        const double wet_mean = c.mean_precip * (1.0 + c.precip_seasonality * std::sin(phase)) / c.wet_day_fraction;
        const bool wet = unif(rng) < c.wet_day_fraction;
        const double amount = depth(rng);
        const double p = wet ? wet_mean * amount : 0.0;
        const double pet = c.mean_pet + c.pet_amplitude * std::sin(phase - std::numbers::pi / 2.0) +
                           c.pet_noise * noise(rng);
        s.dates.push_back(Date::from_serial(base + static_cast<std::int64_t>(i)));
        s.p.push_back(p);
        s.pet.push_back(std::max(0.0, pet));
        s.q_obs.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    return s;
}

void attach_simulated_discharge(ForcingSeries& series, const ModelConfig& config, const PhysicalParams& params,
                                double h_soil) {
    const SoilGeometry geom = derive_geometry(h_soil, params.porosity);
    series.q_obs = simulate_discharge<double>(series.p, series.pet, config, params, geom, default_initial_state(geom));
}

}  // namespace mcp
