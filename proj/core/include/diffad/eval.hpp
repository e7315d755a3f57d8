#pragma once

#include <cstdint>
#include <string>

#include "diffad/common.hpp"
#include "diffad/prompting.hpp"
#include "diffad/sampler.hpp"
#include "diffad/scoring.hpp"
#include "diffad/synthdata.hpp"

namespace diffad {

struct EvalConfig {
    int t_star = 674;
    int n_steps = 100;
    bool conditioned = true;
    int top_k = 5;
    bool znorm_validation = true;  // false: fit z-stats on the test scores
    uint64_t seed = 0;
    int jobs = 1;
};

struct PatchRow {
    std::string slide_id;
    int row = 0;
    int col = 0;
    double raw_score = 0.0;
    double z = 0.0;
    int label = 0;
};

struct SlideResult {
    std::string slide_id;
    Split split = Split::test_in;
    double z_max = 0.0;
    double z_99 = 0.0;
    // dice/iou on test_out slides, tnr on test_in slides.
    double dice = 0.0;
    double iou = 0.0;
    double tnr = 0.0;
};

struct EvalReport {
    double patch_auc = 0.0;
    double patch_aupr = 0.0;
    double slide_auc_zmax = 0.0;
    double slide_aupr_zmax = 0.0;
    double slide_auc_z99 = 0.0;
    double slide_aupr_z99 = 0.0;
    double dice_mean = 0.0;
    double iou_mean = 0.0;
    double tnr_mean = 0.0;
    ZStats zstats;
    std::string mode;
    int t_star = 0;
    std::string config_digest;
    std::vector<SlideResult> slides;
    std::vector<PatchRow> patches;
    std::vector<ScoreMap> heatmaps;  // z and eroded stage per test slide
};

// Full protocol: per-patch condition + reconstruction + score, z-stats from
// the validation split (or the pooled test scores), per-slide erode/score/
// segment, then patch- and slide-level metrics. Reconstruction noise is
// seeded per patch, so results are independent of jobs.
EvalReport evaluate(const std::vector<SlideGrid>& slides, const EpsFn& eps_fn,
                    const EmbeddingProvider& provider, const KeywordPool& pool,
                    const NoiseSchedule& sched, const EvalConfig& cfg);

struct SweepRow {
    int t_star = 0;
    double slide_auc_z99 = 0.0;
    double slide_auc_zmax = 0.0;
    double patch_auc = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    int best_t_star = 0;
};

// Evaluates every candidate and picks the best slide-level AUC under Z_99
// scoring; ties go to the smaller t_star.
SweepResult timestep_sweep(const std::vector<SlideGrid>& slides,
                           const EpsFn& eps_fn, const EmbeddingProvider& provider,
                           const KeywordPool& pool, const NoiseSchedule& sched,
                           const EvalConfig& cfg, const std::vector<int>& candidates);

// Writers stamp the report's config digest into each file header (a
// "# config_digest=..." comment for CSV/PGM, a top-level key for JSON).
void write_report_json(const EvalReport& report, const std::string& path);
void write_patch_scores_csv(const EvalReport& report, const std::string& path);
void write_heatmap_csv(const ScoreMap& map, const std::string& path,
                       const std::string& digest = "");
void write_heatmap_pgm(const ScoreMap& map, const std::string& path,
                       const std::string& digest = "");

}  // namespace diffad
