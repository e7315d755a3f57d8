#pragma once

#include <cstdint>

#include "diffad/common.hpp"

namespace diffad {

// Mann-Whitney statistic (ties count one half) over |pos| * |neg| pairs.
double auc(const std::vector<double>& pos, const std::vector<double>& neg);

// Average precision: positives counted in descending score order, all tied
// items entering together with precision taken at the group boundary.
double aupr(const std::vector<double>& pos, const std::vector<double>& neg);

struct DiceIou {
    double dice = 0.0;
    double iou = 0.0;
};

// Requires at least one ground-truth positive.
DiceIou dice_iou(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt);

// Fraction of cells predicted negative (the metric for all-negative slides).
double tnr(const std::vector<uint8_t>& pred);

}  // namespace diffad
