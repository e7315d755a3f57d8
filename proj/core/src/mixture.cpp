#include "diffad/mixture.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace diffad {

void validate_mixture(const ArchetypeMixture& mix) {
    if (mix.K < 1) throw ConfigError("mixture: K must be >= 1");
    if (mix.pi.size() != static_cast<size_t>(mix.K) ||
        mix.mu.size() != static_cast<size_t>(mix.K) ||
        mix.sigma2.size() != static_cast<size_t>(mix.K) ||
        mix.archetype_emb.size() != static_cast<size_t>(mix.K))
        throw ConfigError("mixture: per-component arrays must have K entries");
    const size_t dim = mix.mu[0].size();
    const size_t d_e = mix.archetype_emb[0].size();
    if (dim == 0 || d_e == 0) throw ConfigError("mixture: empty dimensions");
    double pi_sum = 0.0;
    for (int k = 0; k < mix.K; ++k) {
        if (mix.pi[static_cast<size_t>(k)] < 0.0)
            throw ConfigError("mixture: negative base weight");
        pi_sum += mix.pi[static_cast<size_t>(k)];
        if (mix.mu[static_cast<size_t>(k)].size() != dim ||
            mix.sigma2[static_cast<size_t>(k)].size() != dim)
            throw ConfigError("mixture: inconsistent latent dimensions");
        for (double v : mix.sigma2[static_cast<size_t>(k)])
            if (!(v > 0.0)) throw ConfigError("mixture: sigma2 entries must be positive");
        const auto& e = mix.archetype_emb[static_cast<size_t>(k)];
        if (e.size() != d_e)
            throw ConfigError("mixture: inconsistent embedding dimensions");
        if (std::abs(norm(e) - 1.0) > 1e-9)
            throw ConfigError("mixture: archetype embeddings must be unit-norm");
    }
    if (std::abs(pi_sum - 1.0) > 1e-12)
        throw ConfigError("mixture: base weights must sum to 1");
    if (!(mix.kappa > 0.0)) throw ConfigError("mixture: kappa must be positive");
}

std::vector<double> condition_weights(const ConditionEmbedding& c,
                                      const ArchetypeMixture& mix) {
    if (c.is_null) return mix.pi;
    if (c.values.size() != mix.emb_dim())
        throw ConfigError("condition_weights: embedding dimension mismatch");
    const double cn = norm(c.values);
    if (cn == 0.0)
        throw DataError("condition_weights: zero-norm condition without is_null");

    std::vector<double> logit(static_cast<size_t>(mix.K));
    for (int k = 0; k < mix.K; ++k) {
        const auto& e = mix.archetype_emb[static_cast<size_t>(k)];
        const double cosine = dot(c.values, e) / (cn * norm(e));
        logit[static_cast<size_t>(k)] = mix.kappa * cosine;
    }
    const double m = *std::max_element(logit.begin(), logit.end());
    std::vector<double> w(static_cast<size_t>(mix.K));
    double sum = 0.0;
    for (int k = 0; k < mix.K; ++k) {
        w[static_cast<size_t>(k)] =
            mix.pi[static_cast<size_t>(k)] * std::exp(logit[static_cast<size_t>(k)] - m);
        sum += w[static_cast<size_t>(k)];
    }
    if (!(sum > 0.0))
        throw InvariantError("condition_weights: all blended weights vanished");
    for (auto& x : w) x /= sum;
    return w;
}

Latent analytic_eps(const Latent& z_t, int t, const ConditionEmbedding& c,
                    const ArchetypeMixture& mix, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw InvariantError("analytic_eps: t out of range");
    const size_t dim = mix.dim();
    if (z_t.size() != dim) throw ConfigError("analytic_eps: latent dimension mismatch");
    const double ab = sched.alpha_bar[static_cast<size_t>(t)];
    const std::vector<double> w = condition_weights(c, mix);

    // Log-density of each forward-marginal component at z_t.
    std::vector<double> logp(static_cast<size_t>(mix.K),
                             -std::numeric_limits<double>::infinity());
    constexpr double log2pi = 1.8378770664093454835606594728112;
    for (int k = 0; k < mix.K; ++k) {
        if (!(w[static_cast<size_t>(k)] > 0.0)) continue;
        double lp = std::log(w[static_cast<size_t>(k)]);
        for (size_t i = 0; i < dim; ++i) {
            const double v = ab * mix.sigma2[static_cast<size_t>(k)][i] + (1.0 - ab);
            const double d = z_t[i] - std::sqrt(ab) * mix.mu[static_cast<size_t>(k)][i];
            lp -= 0.5 * (log2pi + std::log(v) + d * d / v);
        }
        logp[static_cast<size_t>(k)] = lp;
    }
    const double m = *std::max_element(logp.begin(), logp.end());
    if (!std::isfinite(m))
        throw InvariantError("analytic_eps: no component has positive weight");
    std::vector<double> resp(static_cast<size_t>(mix.K), 0.0);
    double denom = 0.0;
    for (int k = 0; k < mix.K; ++k) {
        resp[static_cast<size_t>(k)] = std::exp(logp[static_cast<size_t>(k)] - m);
        denom += resp[static_cast<size_t>(k)];
    }

    Latent eps(dim, 0.0);
    for (int k = 0; k < mix.K; ++k) {
        const double r = resp[static_cast<size_t>(k)] / denom;
        if (r == 0.0) continue;
        for (size_t i = 0; i < dim; ++i) {
            const double v = ab * mix.sigma2[static_cast<size_t>(k)][i] + (1.0 - ab);
            const double d = z_t[i] - std::sqrt(ab) * mix.mu[static_cast<size_t>(k)][i];
            eps[i] += r * d / v;
        }
    }
    const double scale = std::sqrt(1.0 - ab);
    for (auto& x : eps) x *= scale;
    if (!all_finite(eps))
        throw InvariantError("analytic_eps: non-finite noise prediction");
    return eps;
}

ArchetypeMixture load_mixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_mixture: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("load_mixture: " + path + ": " + e.what());
    }
    ArchetypeMixture mix;
    try {
        mix.K = j.at("K").get<int>();
        mix.kappa = j.at("kappa").get<double>();
        mix.pi = j.at("pi").get<std::vector<double>>();
        mix.mu = j.at("mu").get<std::vector<Latent>>();
        mix.sigma2 = j.at("sigma2").get<std::vector<std::vector<double>>>();
        mix.archetype_emb =
            j.at("archetype_emb").get<std::vector<std::vector<double>>>();
    } catch (const std::exception& e) {
        throw DataError("load_mixture: " + path + ": " + e.what());
    }
    validate_mixture(mix);
    return mix;
}

void save_mixture(const ArchetypeMixture& mix, const std::string& path) {
    nlohmann::json j;
    j["K"] = mix.K;
    j["kappa"] = mix.kappa;
    j["pi"] = mix.pi;
    j["mu"] = mix.mu;
    j["sigma2"] = mix.sigma2;
    j["archetype_emb"] = mix.archetype_emb;
    std::ofstream out(path);
    if (!out) throw DataError("save_mixture: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace diffad
