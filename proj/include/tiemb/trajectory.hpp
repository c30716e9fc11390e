#pragma once

#include "tiemb/gaussian.hpp"

#include <vector>

namespace tiemb {

/// A labelled state sequence starting at time t_start (states[0] is the state
/// at t_start). Used for both ground truth and filter estimates.
struct LabeledTrajectory {
    int label = 0;
    int t_start = 0;
    std::vector<Vec> states;

    [[nodiscard]] int t_end() const { return t_start + static_cast<int>(states.size()) - 1; }
    [[nodiscard]] bool covers(int k) const { return k >= t_start && k <= t_end(); }
    [[nodiscard]] const Vec& at(int k) const { return states.at(static_cast<std::size_t>(k - t_start)); }
};

using LabeledTrajectorySet = std::vector<LabeledTrajectory>;

}  // namespace tiemb
