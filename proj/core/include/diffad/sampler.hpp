#pragma once

#include <functional>

#include "diffad/common.hpp"
#include "diffad/condition.hpp"
#include "diffad/rng.hpp"
#include "diffad/schedule.hpp"

namespace diffad {

// Any noise predictor: analytic oracle or trained net, bound to a condition.
using EpsFn = std::function<Latent(const Latent& z_t, int t, const ConditionEmbedding& c)>;

struct TimestepGrid {
    int t_star = 0;
    std::vector<int> steps;  // strictly decreasing, steps[0] == t_star
};

// n_steps integers evenly spaced over [1, t_star], descending, first exactly
// t_star; rounding collisions resolved by shifting while preserving count.
TimestepGrid make_grid(int t_star, int n_steps, int T);

// One ancestral reverse step: posterior mean plus sqrt(beta_tilde[t]) * noise.
// Deterministic at t = 1 (beta_tilde[1] = 0).
Latent ddpm_step(const Latent& z_t, int t, const Latent& eps_hat,
                 const Latent& noise, const NoiseSchedule& sched);

// Ring buffer of up to the 4 most recent eps predictions, most recent first.
struct PlmsState {
    std::vector<Latent> history;

    void push(const Latent& eps) {
        history.insert(history.begin(), eps);
        if (history.size() > 4) history.pop_back();
    }
};

// Linear-multistep eps extrapolation (order = history size + 1, capped at 4)
// followed by the deterministic transfer to t_next; t_next = 0 lands on the
// clean sample (alpha_bar = 1).
Latent plms_step(const Latent& z_t, int t, int t_next, const Latent& eps_new,
                 PlmsState& state, const NoiseSchedule& sched);

enum class SamplerKind { ancestral, plms };

// Draws z_T unit-normal and denoises to t = 0. Ancestral visits every t in
// [T, 1]; PLMS walks make_grid(T, n_steps, T) and finishes at the clean
// endpoint.
Latent sample(const EpsFn& eps_fn, const ConditionEmbedding& c,
              const NoiseSchedule& sched, SamplerKind kind, int n_steps,
              size_t dim, Rng& rng);

// Partial-diffusion reconstruction: forward_diffuse(z0, t_star) with a fresh
// noise draw, then PLMS down to 0. t_star = 0 returns z0 unchanged.
Latent reconstruct(const Latent& z0, int t_star, const ConditionEmbedding& c,
                   const EpsFn& eps_fn, const NoiseSchedule& sched, int n_steps,
                   Rng& rng);

}  // namespace diffad
