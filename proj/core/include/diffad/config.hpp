#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace diffad {

// Fully resolved experiment configuration. Defaults are embedded here; a
// config file overrides keys section by section, CLI flags override last.
struct ExperimentConfig {
    // [schedule]
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    // [world]
    int K = 4;
    int dim = 8;
    int d_e = 16;
    double radius_normal = 3.0;
    double radius_ood = 7.5;
    double sigma = 0.2;
    double kappa = 12.0;
    double lat_cos = -0.25;
    double emb_cos_max = 0.5;
    int keywords_per_archetype = 5;
    double keyword_pert = 0.15;
    // [data]
    int n_train = 200;
    int n_val = 20;
    int n_test_in = 20;
    int n_test_out = 20;
    int grid_height = 32;
    int grid_width = 32;
    int region_min = 2;
    int region_max = 8;
    int max_regions = 3;
    std::string dataset_dir;  // empty: <out>/dataset
    // [denoiser]
    std::string denoiser = "analytic";  // analytic | trained
    int hidden = 128;
    int time_features = 16;
    std::string checkpoint_path;  // empty: <out>/train/checkpoint.txt
    // [train]
    int steps = 20000;
    int batch_size = 128;
    double lr = 1e-3;
    double p_drop = 0.1;
    bool resume = false;
    // [sampler]
    std::string sampler = "plms";  // plms | ancestral
    int n_steps = 100;
    int t_star = 674;
    // [prompting]
    int top_k = 5;
    std::string keywords_split = "train";
    // [eval]
    std::string condition_mode = "conditioned";  // conditioned | null
    std::string znorm_source = "validation";     // validation | test
    std::string sweep_candidates = "125,250,375,500,625,750,875,1000";
    bool heatmaps = true;
    // [run]
    uint64_t seed = 42;
    int jobs = 1;
    std::string out_dir = "out";
};

// Defaults overlaid with the file's keys; unknown sections/keys and malformed
// values raise errors naming the line.
ExperimentConfig parse_config_file(const std::string& path);

void validate_config(const ExperimentConfig& cfg);

// Deterministic INI dump of every key. Feeding it back through
// parse_config_file reproduces the same config.
std::string canonical_text(const ExperimentConfig& cfg);

// Digest over the canonical text minus run-local keys (out_dir, jobs,
// resume), so relocating output or changing parallelism does not change the
// experiment's identity.
std::string config_digest(const ExperimentConfig& cfg);

// Digest over only the keys that shape a trained checkpoint: schedule, world,
// data counts, denoiser architecture, train hyperparameters, top_k (it feeds
// the training-time conditions), and the seed. Eval-time keys (t_star, mode,
// znorm source, ...) stay out so one checkpoint serves every evaluation mode.
std::string train_digest(const ExperimentConfig& cfg);

std::vector<int> parse_sweep_candidates(const std::string& text);

}  // namespace diffad
