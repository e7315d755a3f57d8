#pragma once

#include "diffad/common.hpp"

namespace diffad {

// Per-timestep constants of the forward process. Arrays are sized T+1 and
// indexed 1..T; alpha_bar[0] = 1 so t = 0 denotes the clean sample.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> beta_tilde;
};

NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

// z_t = sqrt(alpha_bar[t]) * z0 + sqrt(1 - alpha_bar[t]) * eps; t = 0 is z0.
Latent forward_diffuse(const Latent& z0, int t, const Latent& eps,
                       const NoiseSchedule& sched);

struct PosteriorParams {
    Latent mean;
    double var = 0.0;
};

// eps-parameterized reverse-step parameters:
// mean = (z_t - (beta[t]/sqrt(1-alpha_bar[t])) * eps_hat) / sqrt(alpha[t]),
// var = beta_tilde[t].
PosteriorParams posterior_params(const Latent& z_t, const Latent& eps_hat,
                                 int t, const NoiseSchedule& sched);

}  // namespace diffad
