#pragma once

#include "mcp/data.hpp"
#include "mcp/model.hpp"

#include <cstdint>

namespace mcp {

struct SyntheticClimate {
    double mean_precip = 3.0;       ///< mm/day
    double precip_seasonality = 0.6;  ///< relative amplitude of the annual cycle
    double wet_day_fraction = 0.45;
    double mean_pet = 2.8;          ///< mm/day
    double pet_amplitude = 1.8;     ///< mm/day
    double pet_noise = 0.3;         ///< mm/day, Gaussian
};

/// Seasonal sinusoids plus noise; q_obs left missing.
ForcingSeries synthetic_forcing(const Date& start, std::size_t n_days, std::uint64_t seed,
                                const SyntheticClimate& climate = {});

/// Replaces q_obs by the model's own discharge from the default initial state.
void attach_simulated_discharge(ForcingSeries& series, const ModelConfig& config, const PhysicalParams& params,
                                double h_soil);

}  // namespace mcp
