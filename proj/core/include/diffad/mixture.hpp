#pragma once

#include <string>

#include "diffad/common.hpp"
#include "diffad/condition.hpp"
#include "diffad/schedule.hpp"

namespace diffad {

// Gaussian mixture over latents, shared by the synthetic data generator and
// the analytic oracle denoiser. archetype_emb maps conditions to component
// weights via scaled cosines.
struct ArchetypeMixture {
    int K = 0;
    std::vector<double> pi;
    std::vector<Latent> mu;
    std::vector<std::vector<double>> sigma2;
    std::vector<std::vector<double>> archetype_emb;
    double kappa = 1.0;

    size_t dim() const { return mu.empty() ? 0 : mu[0].size(); }
    size_t emb_dim() const {
        return archetype_emb.empty() ? 0 : archetype_emb[0].size();
    }
};

// Checks the type invariants: weights sum to 1 (1e-12), positive variances,
// unit-norm archetype embeddings (1e-9), consistent dimensions, kappa > 0.
void validate_mixture(const ArchetypeMixture& mix);

// Null condition returns pi unchanged; otherwise softmax over k of
// kappa * cos(c, archetype_emb[k]), blended multiplicatively with pi and
// renormalized.
std::vector<double> condition_weights(const ConditionEmbedding& c,
                                      const ArchetypeMixture& mix);

// Exact noise prediction for mixture data:
// eps = -sqrt(1 - alpha_bar[t]) * grad log q(z_t|c), where q(z_t|c) is the
// forward-marginal mixture sum_k w_k(c) N(sqrt(alpha_bar[t]) mu_k,
// diag(alpha_bar[t] sigma2_k + 1 - alpha_bar[t])).
Latent analytic_eps(const Latent& z_t, int t, const ConditionEmbedding& c,
                    const ArchetypeMixture& mix, const NoiseSchedule& sched);

ArchetypeMixture load_mixture(const std::string& path);
void save_mixture(const ArchetypeMixture& mix, const std::string& path);

}  // namespace diffad
