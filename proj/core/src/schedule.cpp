#include "diffad/schedule.hpp"

namespace diffad {

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ConfigError("build_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.beta.assign(static_cast<size_t>(T) + 1, 0.0);
    s.alpha.assign(static_cast<size_t>(T) + 1, 0.0);
    s.alpha_bar.assign(static_cast<size_t>(T) + 1, 0.0);
    s.beta_tilde.assign(static_cast<size_t>(T) + 1, 0.0);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
        s.beta[t] = beta_start + frac * (beta_end - beta_start);
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        s.beta_tilde[t] =
            (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t];
    }
    return s;
}

Latent forward_diffuse(const Latent& z0, int t, const Latent& eps,
                       const NoiseSchedule& sched) {
    if (t < 0 || t > sched.T)
        throw InvariantError("forward_diffuse: t out of range");
    if (eps.size() != z0.size())
        throw InvariantError("forward_diffuse: eps/z0 dimension mismatch");
    if (t == 0) return z0;
    const double a = std::sqrt(sched.alpha_bar[static_cast<size_t>(t)]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[static_cast<size_t>(t)]);
    Latent z(z0.size());
    for (size_t i = 0; i < z0.size(); ++i) z[i] = a * z0[i] + b * eps[i];
    return z;
}

PosteriorParams posterior_params(const Latent& z_t, const Latent& eps_hat,
                                 int t, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T)
        throw InvariantError("posterior_params: undefined step t");
    if (eps_hat.size() != z_t.size())
        throw InvariantError("posterior_params: eps_hat/z_t dimension mismatch");
    const size_t ti = static_cast<size_t>(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[ti]);
    const double coef = sched.beta[ti] / std::sqrt(1.0 - sched.alpha_bar[ti]);
    PosteriorParams p;
    p.mean.resize(z_t.size());
    for (size_t i = 0; i < z_t.size(); ++i)
        p.mean[i] = inv_sqrt_alpha * (z_t[i] - coef * eps_hat[i]);
    p.var = sched.beta_tilde[ti];
    return p;
}

}  // namespace diffad
