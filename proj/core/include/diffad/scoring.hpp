#pragma once

#include <string>

#include "diffad/common.hpp"

namespace diffad {

// Mean squared error over latent coordinates.
double anomaly_score(const Latent& z0, const Latent& z0_hat);

struct ZStats {
    double mean = 0.0;
    double std = 1.0;
    std::string source;
};

// Mean and population standard deviation; requires >= 30 scores and nonzero
// variance.
ZStats fit_zstats(const std::vector<double>& scores, const std::string& source);

double zscore(double score, const ZStats& stats);

enum class MapStage { raw, z, eroded };

std::string stage_name(MapStage stage);

struct ScoreMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;  // row-major
    std::string slide_id;
    MapStage stage = MapStage::raw;

    size_t at(int r, int c) const {
        return static_cast<size_t>(r) * width + static_cast<size_t>(c);
    }
};

// raw -> z stage transition.
ScoreMap zmap(const ScoreMap& raw, const ZStats& stats);

// Grayscale 2x2 min filter anchored top-left with replicate padding at the
// bottom/right edges; z -> eroded stage transition.
ScoreMap erode(const ScoreMap& map);

struct SlideScore {
    double z_max = 0.0;
    double z_99 = 0.0;
};

// z_max = maximum cell; z_99 = mean of cells at or above the nearest-rank
// 99th percentile (rank floor(0.99 n) + 1, so n <= 100 collapses to the max).
SlideScore slide_scores(const ScoreMap& map);

// Cell predicted anomalous iff z > 0 (strict).
std::vector<uint8_t> segment(const ScoreMap& map);

}  // namespace diffad
