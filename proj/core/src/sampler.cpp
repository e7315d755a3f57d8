#include "diffad/sampler.hpp"

#include <cmath>

namespace diffad {

TimestepGrid make_grid(int t_star, int n_steps, int T) {
    if (t_star < 1 || t_star > T) throw ConfigError("make_grid: t_star out of range");
    if (n_steps < 1 || n_steps > t_star)
        throw ConfigError("make_grid: need 1 <= n_steps <= t_star");
    std::vector<int> asc(static_cast<size_t>(n_steps));
    for (int i = 0; i < n_steps; ++i) {
        const double v =
            n_steps > 1
                ? 1.0 + static_cast<double>(t_star - 1) * i / (n_steps - 1)
                : static_cast<double>(t_star);
        asc[static_cast<size_t>(i)] = static_cast<int>(std::llround(v));
    }
    for (int i = 1; i < n_steps; ++i)
        if (asc[static_cast<size_t>(i)] <= asc[static_cast<size_t>(i - 1)])
            asc[static_cast<size_t>(i)] = asc[static_cast<size_t>(i - 1)] + 1;
    if (asc.back() != t_star)
        throw InvariantError("make_grid: grid does not end at t_star");

    TimestepGrid grid;
    grid.t_star = t_star;
    grid.steps.assign(asc.rbegin(), asc.rend());
    return grid;
}

Latent ddpm_step(const Latent& z_t, int t, const Latent& eps_hat,
                 const Latent& noise, const NoiseSchedule& sched) {
    PosteriorParams p = posterior_params(z_t, eps_hat, t, sched);
    if (noise.size() != z_t.size())
        throw InvariantError("ddpm_step: noise dimension mismatch");
    const double sd = std::sqrt(p.var);
    for (size_t i = 0; i < p.mean.size(); ++i) p.mean[i] += sd * noise[i];
    return p.mean;
}

Latent plms_step(const Latent& z_t, int t, int t_next, const Latent& eps_new,
                 PlmsState& state, const NoiseSchedule& sched) {
    if (t <= t_next || t_next < 0 || t > sched.T)
        throw InvariantError("plms_step: need T >= t > t_next >= 0");
    const size_t dim = z_t.size();
    if (eps_new.size() != dim)
        throw InvariantError("plms_step: eps dimension mismatch");

    // Adams-Bashforth coefficients by number of buffered predictions.
    static const double coef[4][4] = {
        {1.0, 0.0, 0.0, 0.0},
        {3.0 / 2.0, -1.0 / 2.0, 0.0, 0.0},
        {23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0, 0.0},
        {55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0},
    };
    const size_t order = std::min<size_t>(state.history.size(), 3) + 1;
    const double* cf = coef[order - 1];
    Latent eps_prime(dim, 0.0);
    for (size_t i = 0; i < dim; ++i) eps_prime[i] = cf[0] * eps_new[i];
    for (size_t j = 1; j < order; ++j)
        for (size_t i = 0; i < dim; ++i)
            eps_prime[i] += cf[j] * state.history[j - 1][i];

    const double ab_t = sched.alpha_bar[static_cast<size_t>(t)];
    const double ab_n = sched.alpha_bar[static_cast<size_t>(t_next)];
    const double sq_ab_t = std::sqrt(ab_t);
    const double sq1m_t = std::sqrt(1.0 - ab_t);
    const double sq_ab_n = std::sqrt(ab_n);
    const double sq1m_n = std::sqrt(1.0 - ab_n);
    Latent z_next(dim);
    for (size_t i = 0; i < dim; ++i) {
        const double x0 = (z_t[i] - sq1m_t * eps_prime[i]) / sq_ab_t;
        z_next[i] = sq_ab_n * x0 + sq1m_n * eps_prime[i];
    }
    state.push(eps_new);
    return z_next;
}

Latent sample(const EpsFn& eps_fn, const ConditionEmbedding& c,
              const NoiseSchedule& sched, SamplerKind kind, int n_steps,
              size_t dim, Rng& rng) {
    Latent z = rng.normal_vec(dim);
    if (kind == SamplerKind::ancestral) {
        const Latent zero(dim, 0.0);
        for (int t = sched.T; t >= 1; --t) {
            const Latent eps_hat = eps_fn(z, t, c);
            const Latent noise = t > 1 ? rng.normal_vec(dim) : zero;
            z = ddpm_step(z, t, eps_hat, noise, sched);
        }
        return z;
    }
    const TimestepGrid grid = make_grid(sched.T, n_steps, sched.T);
    PlmsState state;
    for (size_t i = 0; i < grid.steps.size(); ++i) {
        const int t = grid.steps[i];
        const int t_next = i + 1 < grid.steps.size() ? grid.steps[i + 1] : 0;
        const Latent eps_new = eps_fn(z, t, c);
        z = plms_step(z, t, t_next, eps_new, state, sched);
    }
    return z;
}

Latent reconstruct(const Latent& z0, int t_star, const ConditionEmbedding& c,
                   const EpsFn& eps_fn, const NoiseSchedule& sched, int n_steps,
                   Rng& rng) {
    if (t_star < 0 || t_star > sched.T)
        throw ConfigError("reconstruct: t_star out of range");
    if (t_star == 0) return z0;
    const Latent eps = rng.normal_vec(z0.size());
    Latent z = forward_diffuse(z0, t_star, eps, sched);
    const TimestepGrid grid = make_grid(t_star, n_steps, sched.T);
    PlmsState state;
    for (size_t i = 0; i < grid.steps.size(); ++i) {
        const int t = grid.steps[i];
        const int t_next = i + 1 < grid.steps.size() ? grid.steps[i + 1] : 0;
        const Latent eps_new = eps_fn(z, t, c);
        z = plms_step(z, t, t_next, eps_new, state, sched);
    }
    return z;
}

}  // namespace diffad
