#pragma once

#include <cstdint>
#include <string>

#include "diffad/common.hpp"
#include "diffad/condition.hpp"
#include "diffad/rng.hpp"
#include "diffad/schedule.hpp"

namespace diffad {

// Small MLP noise predictor. Input is [z_t | sinusoidal(t) | c]; two hidden
// SiLU layers; parameters live in one flat vector laid out as
// [W1 row-major, b1, W2, b2, W3, b3].
struct DenoiserNet {
    int dim = 0;
    int d_e = 0;
    int m = 16;
    int hidden = 128;
    int T = 1000;
    std::vector<double> params;

    int n_in() const { return dim + m + d_e; }
    size_t w1() const { return 0; }
    size_t b1() const { return static_cast<size_t>(hidden) * n_in(); }
    size_t w2() const { return b1() + static_cast<size_t>(hidden); }
    size_t b2() const { return w2() + static_cast<size_t>(hidden) * hidden; }
    size_t w3() const { return b2() + static_cast<size_t>(hidden); }
    size_t b3() const { return w3() + static_cast<size_t>(dim) * hidden; }
    size_t param_count() const { return b3() + static_cast<size_t>(dim); }
};

// He-style init. The condition block of the first layer starts at zero so a
// network trained entirely on null conditions is exactly condition-independent.
DenoiserNet make_net(int dim, int d_e, int m, int hidden, int T, Rng& rng);

// m/2 geometrically spaced frequencies from 1 to T applied to t/T, emitted as
// [sin, cos] pairs.
std::vector<double> time_features(int t, int T, int m);

Latent net_forward(const DenoiserNet& net, const Latent& z_t, int t,
                   const ConditionEmbedding& c);

struct TrainSample {
    Latent z0;
    int t = 1;
    ConditionEmbedding c;
    Latent eps;
};

// Mean over the batch of ||eps - eps_theta(z_t, t, c)||^2 with z_t derived
// from (z0, t, eps); grad is resized and filled with d(loss)/d(params).
double loss_and_grad(const DenoiserNet& net, const std::vector<TrainSample>& batch,
                     const NoiseSchedule& sched, std::vector<double>& grad);

struct TrainItem {
    Latent z0;
    ConditionEmbedding c;
};

struct TrainConfig {
    int steps = 20000;
    int batch_size = 128;
    double lr = 1e-3;
    double p_drop = 0.1;
};

struct TrainState {
    DenoiserNet net;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    int64_t step = 0;
    Rng rng{0};
};

TrainState make_train_state(const DenoiserNet& net, uint64_t seed);

// Runs Adam for cfg.steps - state.step further steps (no-op if already done);
// appends one loss value per executed step to loss_curve.
void train_net(TrainState& state, const std::vector<TrainItem>& data,
               const NoiseSchedule& sched, const TrainConfig& cfg,
               std::vector<double>& loss_curve);

struct Checkpoint {
    TrainState state;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::string config_digest;
    std::string dataset_digest;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
// Rejects mismatched latent/condition dimensions against the expected values.
Checkpoint load_checkpoint(const std::string& path, int expect_dim, int expect_d_e);

}  // namespace diffad
