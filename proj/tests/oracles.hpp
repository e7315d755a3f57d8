#pragma once

// Independent reference implementations the tests compare against. Everything
// here is written the dumb brute-force way on purpose; none of it shares code
// with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "diffad/mixture.hpp"
#include "diffad/net.hpp"
#include "diffad/schedule.hpp"

namespace oracle {

inline double rel_err(double got, double want) {
    const double scale = std::max({std::abs(got), std::abs(want), 1e-12});
    return std::abs(got - want) / scale;
}

// log q(z | c) = log sum_k w_k N(z; sqrt(ab)*mu_k, diag(ab*sig2 + 1 - ab)),
// accumulated in long double without the library's log-sum-exp path.
inline long double log_q(const std::vector<double>& z, int t,
                         const std::vector<double>& weights,
                         const diffad::ArchetypeMixture& mix,
                         const diffad::NoiseSchedule& sched) {
    const long double ab = sched.alpha_bar[static_cast<size_t>(t)];
    const long double root_ab = sqrtl(ab);
    long double total = 0.0L;
    for (size_t k = 0; k < static_cast<size_t>(mix.K); ++k) {
        if (weights[k] <= 0.0) continue;
        long double logp = logl(static_cast<long double>(weights[k]));
        for (size_t i = 0; i < z.size(); ++i) {
            const long double var = ab * mix.sigma2[k][i] + (1.0L - ab);
            const long double d = z[i] - root_ab * mix.mu[k][i];
            logp += -0.5L * logl(2.0L * 3.14159265358979323846264338327950288L *
                                 var) -
                    0.5L * d * d / var;
        }
        total += expl(logp);
    }
    return logl(total);
}

// eps = -sqrt(1 - alpha_bar) * grad log q via central differences (step h).
inline std::vector<double> fd_eps(const std::vector<double>& z, int t,
                                  const std::vector<double>& weights,
                                  const diffad::ArchetypeMixture& mix,
                                  const diffad::NoiseSchedule& sched,
                                  double h = 1e-4) {
    const double root_1m = std::sqrt(1.0 - sched.alpha_bar[static_cast<size_t>(t)]);
    std::vector<double> eps(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        std::vector<double> hi = z, lo = z;
        hi[i] += h;
        lo[i] -= h;
        const long double g =
            (log_q(hi, t, weights, mix, sched) - log_q(lo, t, weights, mix, sched)) /
            (2.0L * h);
        eps[i] = -root_1m * static_cast<double>(g);
    }
    return eps;
}

// Central finite differences of the training loss, one parameter at a time.
inline std::vector<double> fd_loss_grad(diffad::DenoiserNet net,
                                        const std::vector<diffad::TrainSample>& batch,
                                        const diffad::NoiseSchedule& sched,
                                        double h = 1e-5) {
    std::vector<double> grad(net.params.size());
    std::vector<double> scratch;
    for (size_t i = 0; i < net.params.size(); ++i) {
        const double keep = net.params[i];
        net.params[i] = keep + h;
        const double hi = diffad::loss_and_grad(net, batch, sched, scratch);
        net.params[i] = keep - h;
        const double lo = diffad::loss_and_grad(net, batch, sched, scratch);
        net.params[i] = keep;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

// AUC by exhaustive pair counting, ties worth one half.
inline double brute_auc(const std::vector<double>& pos,
                        const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos)
        for (double n : neg) {
            if (p > n)
                wins += 1.0;
            else if (p == n)
                wins += 0.5;
        }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Average precision by enumerating every distinct threshold in descending
// order; tied scores enter as one group and precision is read at the boundary.
inline double brute_aupr(const std::vector<double>& pos,
                         const std::vector<double>& neg) {
    std::vector<double> thresholds;
    thresholds.insert(thresholds.end(), pos.begin(), pos.end());
    thresholds.insert(thresholds.end(), neg.begin(), neg.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());
    std::reverse(thresholds.begin(), thresholds.end());
    double ap = 0.0;
    double prev_recall = 0.0;
    for (double th : thresholds) {
        size_t tp = 0, fp = 0;
        for (double p : pos) tp += p >= th;
        for (double n : neg) fp += n >= th;
        const double recall = static_cast<double>(tp) / static_cast<double>(pos.size());
        const double precision =
            static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

// 2x2 min filter anchored top-left with replicate padding, windows spelled out.
inline std::vector<double> brute_erode(const std::vector<double>& v, int h, int w) {
    std::vector<double> out(v.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const int r1 = std::min(r + 1, h - 1);
            const int c1 = std::min(c + 1, w - 1);
            double m = v[static_cast<size_t>(r) * w + c];
            m = std::min(m, v[static_cast<size_t>(r) * w + c1]);
            m = std::min(m, v[static_cast<size_t>(r1) * w + c]);
            m = std::min(m, v[static_cast<size_t>(r1) * w + c1]);
            out[static_cast<size_t>(r) * w + c] = m;
        }
    return out;
}

struct BruteOverlap {
    double dice = 0.0;
    double iou = 0.0;
};

inline BruteOverlap brute_dice_iou(const std::vector<uint8_t>& pred,
                                   const std::vector<uint8_t>& gt) {
    size_t inter = 0, np = 0, ng = 0, uni = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        inter += pred[i] && gt[i];
        uni += pred[i] || gt[i];
        np += pred[i] != 0;
        ng += gt[i] != 0;
    }
    BruteOverlap o;
    o.dice = np + ng == 0 ? 0.0
                          : 2.0 * static_cast<double>(inter) /
                                static_cast<double>(np + ng);
    o.iou = uni == 0 ? 0.0
                     : static_cast<double>(inter) / static_cast<double>(uni);
    return o;
}

inline double brute_tnr(const std::vector<uint8_t>& pred) {
    size_t neg = 0;
    for (uint8_t p : pred) neg += p == 0;
    return static_cast<double>(neg) / static_cast<double>(pred.size());
}

// alpha_bar recomputed as an extended-precision running product.
inline std::vector<long double> cumprod_alpha_bar(int T, double beta_start,
                                                  double beta_end) {
    std::vector<long double> ab(static_cast<size_t>(T) + 1, 1.0L);
    for (int t = 1; t <= T; ++t) {
        const long double frac =
            T == 1 ? 0.0L
                   : static_cast<long double>(t - 1) / static_cast<long double>(T - 1);
        const long double beta = beta_start + frac * (beta_end - beta_start);
        ab[static_cast<size_t>(t)] = ab[static_cast<size_t>(t) - 1] * (1.0L - beta);
    }
    return ab;
}

// Posterior mean in its mu-tilde parameterization, substituting the z0 that
// the eps prediction implies.
inline std::vector<double> mu_tilde_mean(const std::vector<double>& z_t,
                                         const std::vector<double>& eps_hat, int t,
                                         const diffad::NoiseSchedule& sched) {
    const size_t ti = static_cast<size_t>(t);
    const double ab_t = sched.alpha_bar[ti];
    const double ab_prev = sched.alpha_bar[ti - 1];
    const double beta = sched.beta[ti];
    const double alpha = sched.alpha[ti];
    std::vector<double> mean(z_t.size());
    for (size_t i = 0; i < z_t.size(); ++i) {
        const double z0 = (z_t[i] - std::sqrt(1.0 - ab_t) * eps_hat[i]) /
                          std::sqrt(ab_t);
        mean[i] = (std::sqrt(ab_prev) * beta * z0 +
                   std::sqrt(alpha) * (1.0 - ab_prev) * z_t[i]) /
                  (1.0 - ab_t);
    }
    return mean;
}

// Nearest-rank Z_99: cutoff is the (floor(99n/100) + 1)-th smallest value;
// the score is the mean of every cell at or above it.
inline double brute_z99(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    const size_t rank = 99 * n / 100 + 1;  // 1-based
    const double cutoff = values[rank - 1];
    double sum = 0.0;
    size_t count = 0;
    for (double v : values)
        if (v >= cutoff) {
            sum += v;
            ++count;
        }
    return sum / static_cast<double>(count);
}

// One-sided Mann-Whitney p-value (normal approximation with tie correction)
// for the hypothesis that `high` is stochastically greater than `low`.
inline double mann_whitney_p(const std::vector<double>& high,
                             const std::vector<double>& low) {
    const double n1 = static_cast<double>(high.size());
    const double n2 = static_cast<double>(low.size());
    double u = 0.0;
    for (double a : high)
        for (double b : low) {
            if (a > b)
                u += 1.0;
            else if (a == b)
                u += 0.5;
        }
    std::vector<double> all;
    all.insert(all.end(), high.begin(), high.end());
    all.insert(all.end(), low.begin(), low.end());
    std::sort(all.begin(), all.end());
    double tie_sum = 0.0;
    for (size_t i = 0; i < all.size();) {
        size_t j = i;
        while (j < all.size() && all[j] == all[i]) ++j;
        const double tied = static_cast<double>(j - i);
        tie_sum += tied * tied * tied - tied;
        i = j;
    }
    const double n = n1 + n2;
    const double mean_u = n1 * n2 / 2.0;
    const double var_u =
        n1 * n2 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if (var_u <= 0.0) return 1.0;
    const double z = (u - mean_u) / std::sqrt(var_u);
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace oracle
