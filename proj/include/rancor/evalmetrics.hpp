#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rancor/volume.hpp"

namespace rancor {

struct LabelOverlapRow {
    std::int32_t label = 0;
    std::uint64_t intersection = 0;
    std::uint64_t reference_size = 0;
    double to = 0.0;
};

struct OverlapReport {
    double aggregate = 0.0;                 // sum |F_L & R_L| / sum |R_L|
    std::vector<LabelOverlapRow> per_label; // sorted by label

    std::string to_csv() const;
    std::string summary() const;
};

// Target overlap over all non-background labels present in the reference.
OverlapReport target_overlap(const LabelVolume& test, const LabelVolume& reference);

struct EndpointError {
    double mean = 0.0;
    double max = 0.0;
};

EndpointError endpoint_error(const DisplacementField& u, const DisplacementField& u_true);

struct EvaluationReport {
    OverlapReport overlap;
    std::uint64_t test_label_count = 0;      // distinct non-background labels after warping
    std::uint64_t reference_label_count = 0;
};

// Transport moving labels through disp (nearest neighbor) and score them
// against the reference labels.
EvaluationReport evaluate_registration(const DisplacementField& disp,
                                       const LabelVolume& moving_labels,
                                       const LabelVolume& reference_labels);

} // namespace rancor
