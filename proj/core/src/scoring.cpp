#include "diffad/scoring.hpp"

#include <algorithm>

namespace diffad {

double anomaly_score(const Latent& z0, const Latent& z0_hat) {
    if (z0.size() != z0_hat.size() || z0.empty())
        throw InvariantError("anomaly_score: dimension mismatch");
    return squared_distance(z0, z0_hat) / static_cast<double>(z0.size());
}

ZStats fit_zstats(const std::vector<double>& scores, const std::string& source) {
    if (scores.size() < 30)
        throw DataError("fit_zstats: need at least 30 scores, got " +
                        std::to_string(scores.size()));
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());
    if (!(var > 0.0)) throw DataError("fit_zstats: degenerate (zero-variance) scores");
    ZStats st;
    st.mean = mean;
    st.std = std::sqrt(var);
    st.source = source;
    return st;
}

double zscore(double score, const ZStats& stats) {
    return (score - stats.mean) / stats.std;
}

std::string stage_name(MapStage stage) {
    switch (stage) {
        case MapStage::raw: return "raw";
        case MapStage::z: return "z";
        case MapStage::eroded: return "eroded";
    }
    throw InvariantError("stage_name: bad stage");
}

ScoreMap zmap(const ScoreMap& raw, const ZStats& stats) {
    if (raw.stage != MapStage::raw)
        throw InvariantError("zmap: input must be a raw-stage map");
    ScoreMap out = raw;
    out.stage = MapStage::z;
    for (auto& v : out.values) v = zscore(v, stats);
    return out;
}

ScoreMap erode(const ScoreMap& map) {
    if (map.stage != MapStage::z)
        throw InvariantError("erode: input must be a z-stage map");
    ScoreMap out = map;
    out.stage = MapStage::eroded;
    // Separable: horizontal pass then vertical pass over the 2x2 window.
    std::vector<double> hmin(map.values.size());
    for (int r = 0; r < map.height; ++r)
        for (int c = 0; c < map.width; ++c) {
            const int cc = std::min(c + 1, map.width - 1);
            hmin[map.at(r, c)] = std::min(map.values[map.at(r, c)],
                                          map.values[map.at(r, cc)]);
        }
    for (int r = 0; r < map.height; ++r)
        for (int c = 0; c < map.width; ++c) {
            const int rr = std::min(r + 1, map.height - 1);
            out.values[map.at(r, c)] =
                std::min(hmin[map.at(r, c)], hmin[map.at(rr, c)]);
        }
    return out;
}

SlideScore slide_scores(const ScoreMap& map) {
    if (map.stage != MapStage::eroded)
        throw InvariantError("slide_scores: input must be an eroded-stage map");
    if (map.values.empty()) throw InvariantError("slide_scores: empty map");
    SlideScore s;
    s.z_max = *std::max_element(map.values.begin(), map.values.end());
    const size_t n = map.values.size();
    const size_t rank = 99 * n / 100 + 1;  // nearest-rank, 1-based
    std::vector<double> sorted = map.values;
    std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
    const double cutoff = sorted[rank - 1];
    double sum = 0.0;
    size_t count = 0;
    for (double v : map.values)
        if (v >= cutoff) {
            sum += v;
            ++count;
        }
    s.z_99 = sum / static_cast<double>(count);
    return s;
}

std::vector<uint8_t> segment(const ScoreMap& map) {
    if (map.stage != MapStage::eroded)
        throw InvariantError("segment: input must be an eroded-stage map");
    std::vector<uint8_t> pred(map.values.size());
    for (size_t i = 0; i < map.values.size(); ++i)
        pred[i] = map.values[i] > 0.0 ? 1 : 0;
    return pred;
}

}  // namespace diffad
