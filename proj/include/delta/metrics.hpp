#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace delta {

struct F1Scores {
    double macro = 0.0;
    double micro = 0.0;
};

// Single-label multiclass F1 over masked nodes. Micro reduces to global
// accuracy; macro averages per-class F1 with zero-division -> 0.
inline F1Scores macro_micro_f1(const std::vector<int>& predictions,
                               const std::vector<int>& truths,
                               const std::vector<std::uint8_t>& mask,
                               int num_classes) {
    if (predictions.size() != truths.size() || mask.size() != truths.size())
        throw std::invalid_argument("macro_micro_f1: length mismatch");
    std::size_t n = 0, correct = 0;
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!mask[i]) continue;
        int p = predictions[i], t = truths[i];
        if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
            throw std::invalid_argument("macro_micro_f1: class index out of range");
        ++n;
        if (p == t) { ++correct; ++tp[t]; }
        else { ++fp[p]; ++fn[t]; }
    }
    if (n == 0) throw std::invalid_argument("macro_micro_f1: empty mask");
    F1Scores s;
    s.micro = static_cast<double>(correct) / static_cast<double>(n);
    double macro_sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        macro_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
    }
    s.macro = macro_sum / static_cast<double>(num_classes);
    return s;
}

} // namespace delta
