#include "diffad/metrics.hpp"

#include <algorithm>

namespace diffad {

double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty())
        throw DataError("auc: undefined for an empty class");
    std::vector<std::pair<double, int>> all;
    all.reserve(pos.size() + neg.size());
    for (double s : pos) all.emplace_back(s, 1);
    for (double s : neg) all.emplace_back(s, 0);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // Midranks over tie groups; rank sum of positives gives the U statistic.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (all[k].second) rank_sum_pos += midrank;
        i = j;
    }
    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

double aupr(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty())
        throw DataError("aupr: undefined for an empty class");
    std::vector<std::pair<double, int>> all;
    all.reserve(pos.size() + neg.size());
    for (double s : pos) all.emplace_back(s, 1);
    for (double s : neg) all.emplace_back(s, 0);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double ap = 0.0;
    size_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        size_t group_tp = 0, group_fp = 0;
        while (j < all.size() && all[j].first == all[i].first) {
            if (all[j].second)
                ++group_tp;
            else
                ++group_fp;
            ++j;
        }
        tp += group_tp;
        fp += group_fp;
        if (group_tp > 0) {
            const double precision =
                static_cast<double>(tp) / static_cast<double>(tp + fp);
            ap += static_cast<double>(group_tp) * precision;
        }
        i = j;
    }
    return ap / static_cast<double>(pos.size());
}

DiceIou dice_iou(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt) {
    if (pred.size() != gt.size())
        throw InvariantError("dice_iou: mask size mismatch");
    size_t p = 0, g = 0, both = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i]) ++p;
        if (gt[i]) ++g;
        if (pred[i] && gt[i]) ++both;
    }
    if (g == 0) throw DataError("dice_iou: undefined for an empty ground truth");
    DiceIou r;
    r.dice = 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
    const size_t uni = p + g - both;
    r.iou = static_cast<double>(both) / static_cast<double>(uni);
    return r;
}

double tnr(const std::vector<uint8_t>& pred) {
    if (pred.empty()) throw InvariantError("tnr: empty mask");
    size_t neg = 0;
    for (uint8_t v : pred)
        if (!v) ++neg;
    return static_cast<double>(neg) / static_cast<double>(pred.size());
}

}  // namespace diffad
