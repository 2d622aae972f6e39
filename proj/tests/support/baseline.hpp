#pragma once

#include <vector>

#include "fscil/config.hpp"
#include "fscil/protocol.hpp"

namespace baseline {

// Incremental-frozen baseline written without the pipeline: cross-entropy on
// the base session, then a frozen encoder with one prototype per class.
// Returns the total accuracy after every session.
std::vector<double> frozen_baseline_accuracies(const fscil::ExperimentConfig& config, const fscil::TaskStream& stream);

}  // namespace baseline
