#include "rancor/evalmetrics.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace rancor {

OverlapReport target_overlap(const LabelVolume& test, const LabelVolume& reference) {
    require_same_dims(test.dims, reference.dims, "target_overlap");

    std::map<std::int32_t, LabelOverlapRow> rows;
    for (std::size_t i = 0; i < reference.data.size(); ++i) {
        const std::int32_t r = reference.data[i];
        if (r <= 0) continue;
        LabelOverlapRow& row = rows[r];
        row.label = r;
        ++row.reference_size;
        if (test.data[i] == r) ++row.intersection;
    }
    if (rows.empty()) {
        throw InvalidInputError("target_overlap: reference volume is entirely background");
    }

    OverlapReport report;
    std::uint64_t inter_sum = 0, ref_sum = 0;
    for (auto& [label, row] : rows) {
        row.to = double(row.intersection) / double(row.reference_size);
        inter_sum += row.intersection;
        ref_sum += row.reference_size;
        report.per_label.push_back(row);
    }
    report.aggregate = double(inter_sum) / double(ref_sum);
    return report;
}

std::string OverlapReport::to_csv() const {
    std::ostringstream os;
    os << "label,intersection,reference_size,to\n";
    for (const LabelOverlapRow& row : per_label) {
        os << row.label << "," << row.intersection << "," << row.reference_size << "," << row.to
           << "\n";
    }
    return os.str();
}

std::string OverlapReport::summary() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "TO=%.6f", aggregate);
    return buf;
}

EndpointError endpoint_error(const DisplacementField& u, const DisplacementField& u_true) {
    require_same_dims(u.dims, u_true.dims, "endpoint_error");
    const std::size_t n = u.dims.voxels();
    EndpointError e;
    if (n == 0) return e;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = u.comp[0][i] - u_true.comp[0][i];
        const double dy = u.comp[1][i] - u_true.comp[1][i];
        const double dz = u.comp[2][i] - u_true.comp[2][i];
        const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
        sum += d;
        if (d > e.max) e.max = d;
    }
    e.mean = sum / double(n);
    return e;
}

EvaluationReport evaluate_registration(const DisplacementField& disp,
                                       const LabelVolume& moving_labels,
                                       const LabelVolume& reference_labels) {
    const LabelVolume warped = warp_nearest(moving_labels, disp);

    EvaluationReport report;
    report.overlap = target_overlap(warped, reference_labels);

    std::set<std::int32_t> test_labels, ref_labels;
    for (std::int32_t v : warped.data)
        if (v > 0) test_labels.insert(v);
    for (std::int32_t v : reference_labels.data)
        if (v > 0) ref_labels.insert(v);
    report.test_label_count = test_labels.size();
    report.reference_label_count = ref_labels.size();
    return report;
}

} // namespace rancor
