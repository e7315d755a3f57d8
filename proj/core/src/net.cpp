#include "diffad/net.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace diffad {

namespace {

double silu(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return x * s;
}

double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s + x * s * (1.0 - s);
}

std::string hexd(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.13a", v);
    return buf;
}

double parse_hexd(const std::string& s, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw DataError("checkpoint: bad float '" + s + "' in " + path);
    return v;
}

struct Scratch {
    std::vector<double> x, pre1, h1, pre2, h2, out;
    std::vector<double> dout, dh2, dpre2, dh1, dpre1;
};

void forward_into(const DenoiserNet& net, const Latent& z_t, int t,
                  const ConditionEmbedding& c, Scratch& s) {
    const int n_in = net.n_in();
    const int H = net.hidden;
    s.x.resize(static_cast<size_t>(n_in));
    size_t p = 0;
    for (double v : z_t) s.x[p++] = v;
    for (double v : time_features(t, net.T, net.m)) s.x[p++] = v;
    for (double v : c.values) s.x[p++] = v;

    const double* params = net.params.data();
    const double* W1 = params + net.w1();
    const double* b1 = params + net.b1();
    const double* W2 = params + net.w2();
    const double* b2 = params + net.b2();
    const double* W3 = params + net.w3();
    const double* b3 = params + net.b3();

    s.pre1.resize(static_cast<size_t>(H));
    s.h1.resize(static_cast<size_t>(H));
    for (int j = 0; j < H; ++j) {
        const double* row = W1 + static_cast<size_t>(j) * n_in;
        double acc = b1[j];
        for (int i = 0; i < n_in; ++i) acc += row[i] * s.x[static_cast<size_t>(i)];
        s.pre1[static_cast<size_t>(j)] = acc;
        s.h1[static_cast<size_t>(j)] = silu(acc);
    }
    s.pre2.resize(static_cast<size_t>(H));
    s.h2.resize(static_cast<size_t>(H));
    for (int j = 0; j < H; ++j) {
        const double* row = W2 + static_cast<size_t>(j) * H;
        double acc = b2[j];
        for (int i = 0; i < H; ++i) acc += row[i] * s.h1[static_cast<size_t>(i)];
        s.pre2[static_cast<size_t>(j)] = acc;
        s.h2[static_cast<size_t>(j)] = silu(acc);
    }
    s.out.resize(static_cast<size_t>(net.dim));
    for (int o = 0; o < net.dim; ++o) {
        const double* row = W3 + static_cast<size_t>(o) * H;
        double acc = b3[o];
        for (int i = 0; i < H; ++i) acc += row[i] * s.h2[static_cast<size_t>(i)];
        s.out[static_cast<size_t>(o)] = acc;
    }
}

}  // namespace

DenoiserNet make_net(int dim, int d_e, int m, int hidden, int T, Rng& rng) {
    if (dim < 1 || d_e < 1 || hidden < 1 || T < 1)
        throw ConfigError("make_net: dimensions must be positive");
    if (m < 2 || m % 2 != 0) throw ConfigError("make_net: m must be even and >= 2");
    DenoiserNet net;
    net.dim = dim;
    net.d_e = d_e;
    net.m = m;
    net.hidden = hidden;
    net.T = T;
    net.params.assign(net.param_count(), 0.0);
    const int n_in = net.n_in();
    const double s1 = std::sqrt(2.0 / n_in);
    const double s2 = std::sqrt(2.0 / hidden);
    const double s3 = std::sqrt(1.0 / hidden);
    for (int j = 0; j < hidden; ++j)
        for (int i = 0; i < n_in; ++i) {
            const double v = rng.normal() * s1;
            if (i < dim + m)
                net.params[net.w1() + static_cast<size_t>(j) * n_in + i] = v;
        }
    for (int j = 0; j < hidden; ++j)
        for (int i = 0; i < hidden; ++i)
            net.params[net.w2() + static_cast<size_t>(j) * hidden + i] =
                rng.normal() * s2;
    for (int o = 0; o < dim; ++o)
        for (int i = 0; i < hidden; ++i)
            net.params[net.w3() + static_cast<size_t>(o) * hidden + i] =
                rng.normal() * s3;
    return net;
}

std::vector<double> time_features(int t, int T, int m) {
    if (m < 2 || m % 2 != 0)
        throw ConfigError("time_features: m must be even and >= 2");
    const int F = m / 2;
    std::vector<double> feat(static_cast<size_t>(m));
    const double x = static_cast<double>(t) / T;
    for (int j = 0; j < F; ++j) {
        const double omega =
            F > 1 ? std::pow(static_cast<double>(T), static_cast<double>(j) / (F - 1))
                  : 1.0;
        feat[static_cast<size_t>(2 * j)] = std::sin(omega * x);
        feat[static_cast<size_t>(2 * j + 1)] = std::cos(omega * x);
    }
    return feat;
}

Latent net_forward(const DenoiserNet& net, const Latent& z_t, int t,
                   const ConditionEmbedding& c) {
    if (z_t.size() != static_cast<size_t>(net.dim))
        throw ConfigError("net_forward: latent dimension mismatch");
    if (c.values.size() != static_cast<size_t>(net.d_e))
        throw ConfigError("net_forward: condition dimension mismatch");
    Scratch s;
    forward_into(net, z_t, t, c, s);
    return s.out;
}

double loss_and_grad(const DenoiserNet& net, const std::vector<TrainSample>& batch,
                     const NoiseSchedule& sched, std::vector<double>& grad) {
    if (batch.empty()) throw ConfigError("loss_and_grad: empty batch");
    const int n_in = net.n_in();
    const int H = net.hidden;
    grad.assign(net.param_count(), 0.0);
    double* gW1 = grad.data() + net.w1();
    double* gb1 = grad.data() + net.b1();
    double* gW2 = grad.data() + net.w2();
    double* gb2 = grad.data() + net.b2();
    double* gW3 = grad.data() + net.w3();
    double* gb3 = grad.data() + net.b3();
    const double* W2 = net.params.data() + net.w2();
    const double* W3 = net.params.data() + net.w3();

    Scratch s;
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const TrainSample& sample : batch) {
        const Latent z_t = forward_diffuse(sample.z0, sample.t, sample.eps, sched);
        forward_into(net, z_t, sample.t, sample.c, s);

        s.dout.resize(static_cast<size_t>(net.dim));
        for (int o = 0; o < net.dim; ++o) {
            const double r = s.out[static_cast<size_t>(o)] - sample.eps[static_cast<size_t>(o)];
            loss += r * r * inv_b;
            s.dout[static_cast<size_t>(o)] = 2.0 * r * inv_b;
        }
        s.dh2.assign(static_cast<size_t>(H), 0.0);
        for (int o = 0; o < net.dim; ++o) {
            const double d = s.dout[static_cast<size_t>(o)];
            const double* row = W3 + static_cast<size_t>(o) * H;
            double* grow = gW3 + static_cast<size_t>(o) * H;
            for (int i = 0; i < H; ++i) {
                grow[i] += d * s.h2[static_cast<size_t>(i)];
                s.dh2[static_cast<size_t>(i)] += d * row[i];
            }
            gb3[o] += d;
        }
        s.dpre2.resize(static_cast<size_t>(H));
        for (int j = 0; j < H; ++j)
            s.dpre2[static_cast<size_t>(j)] =
                s.dh2[static_cast<size_t>(j)] * silu_grad(s.pre2[static_cast<size_t>(j)]);
        s.dh1.assign(static_cast<size_t>(H), 0.0);
        for (int j = 0; j < H; ++j) {
            const double d = s.dpre2[static_cast<size_t>(j)];
            const double* row = W2 + static_cast<size_t>(j) * H;
            double* grow = gW2 + static_cast<size_t>(j) * H;
            for (int i = 0; i < H; ++i) {
                grow[i] += d * s.h1[static_cast<size_t>(i)];
                s.dh1[static_cast<size_t>(i)] += d * row[i];
            }
            gb2[j] += d;
        }
        s.dpre1.resize(static_cast<size_t>(H));
        for (int j = 0; j < H; ++j)
            s.dpre1[static_cast<size_t>(j)] =
                s.dh1[static_cast<size_t>(j)] * silu_grad(s.pre1[static_cast<size_t>(j)]);
        for (int j = 0; j < H; ++j) {
            const double d = s.dpre1[static_cast<size_t>(j)];
            double* grow = gW1 + static_cast<size_t>(j) * n_in;
            for (int i = 0; i < n_in; ++i) grow[i] += d * s.x[static_cast<size_t>(i)];
            gb1[j] += d;
        }
    }
    return loss;
}

TrainState make_train_state(const DenoiserNet& net, uint64_t seed) {
    TrainState st;
    st.net = net;
    st.adam_m.assign(net.param_count(), 0.0);
    st.adam_v.assign(net.param_count(), 0.0);
    st.step = 0;
    st.rng = Rng(seed);
    return st;
}

void train_net(TrainState& state, const std::vector<TrainItem>& data,
               const NoiseSchedule& sched, const TrainConfig& cfg,
               std::vector<double>& loss_curve) {
    if (data.empty()) throw ConfigError("train_net: empty dataset");
    if (cfg.batch_size < 1) throw ConfigError("train_net: batch_size must be >= 1");
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::vector<TrainSample> batch(static_cast<size_t>(cfg.batch_size));
    std::vector<double> grad;
    const size_t d_e = data[0].c.values.size();
    while (state.step < cfg.steps) {
        for (auto& sample : batch) {
            const TrainItem& item = data[state.rng.uniform_u64(data.size())];
            sample.z0 = item.z0;
            sample.t = state.rng.uniform_int(1, sched.T);
            sample.eps = state.rng.normal_vec(sample.z0.size());
            sample.c = state.rng.uniform() < cfg.p_drop ? null_condition(d_e) : item.c;
        }
        const double loss = loss_and_grad(state.net, batch, sched, grad);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "train_net: non-finite loss at step " << state.step + 1
                << " (lr=" << cfg.lr << ")";
            throw ConfigError(msg.str());
        }
        ++state.step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
        for (size_t i = 0; i < state.net.params.size(); ++i) {
            state.adam_m[i] = beta1 * state.adam_m[i] + (1.0 - beta1) * grad[i];
            state.adam_v[i] = beta2 * state.adam_v[i] + (1.0 - beta2) * grad[i] * grad[i];
            state.net.params[i] -= cfg.lr * (state.adam_m[i] / bc1) /
                                   (std::sqrt(state.adam_v[i] / bc2) + adam_eps);
        }
        loss_curve.push_back(loss);
    }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_checkpoint: cannot open " + path);
    const DenoiserNet& net = ck.state.net;
    out << "diffad-checkpoint v1\n";
    out << "dim " << net.dim << "\n";
    out << "d_e " << net.d_e << "\n";
    out << "m " << net.m << "\n";
    out << "hidden " << net.hidden << "\n";
    out << "T " << net.T << "\n";
    out << "beta_start " << hexd(ck.beta_start) << "\n";
    out << "beta_end " << hexd(ck.beta_end) << "\n";
    out << "config_digest " << ck.config_digest << "\n";
    out << "dataset_digest " << ck.dataset_digest << "\n";
    out << "step " << ck.state.step << "\n";
    out << "n_params " << net.params.size() << "\n";
    out << "params\n";
    for (double v : net.params) out << hexd(v) << "\n";
    out << "adam_m\n";
    for (double v : ck.state.adam_m) out << hexd(v) << "\n";
    out << "adam_v\n";
    for (double v : ck.state.adam_v) out << hexd(v) << "\n";
    out << "rng " << ck.state.rng.engine() << "\n";
    out << "end\n";
    if (!out) throw DataError("save_checkpoint: write failed for " + path);
}

namespace {

void expect_key(std::istream& in, const std::string& key, const std::string& path) {
    std::string word;
    if (!(in >> word) || word != key)
        throw DataError("checkpoint: expected '" + key + "' in " + path);
}

template <typename T>
T read_value(std::istream& in, const std::string& key, const std::string& path) {
    expect_key(in, key, path);
    T v{};
    if (!(in >> v)) throw DataError("checkpoint: bad value for '" + key + "' in " + path);
    return v;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path, int expect_dim, int expect_d_e) {
    std::ifstream in(path);
    if (!in) throw DataError("load_checkpoint: cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != "diffad-checkpoint v1")
        throw DataError("checkpoint: unrecognized header in " + path);

    Checkpoint ck;
    DenoiserNet net;
    net.dim = read_value<int>(in, "dim", path);
    net.d_e = read_value<int>(in, "d_e", path);
    net.m = read_value<int>(in, "m", path);
    net.hidden = read_value<int>(in, "hidden", path);
    net.T = read_value<int>(in, "T", path);
    if (net.dim != expect_dim)
        throw DataError("load_checkpoint: latent dimension mismatch (checkpoint " +
                        std::to_string(net.dim) + ", expected " +
                        std::to_string(expect_dim) + ")");
    if (net.d_e != expect_d_e)
        throw DataError("load_checkpoint: condition dimension mismatch (checkpoint " +
                        std::to_string(net.d_e) + ", expected " +
                        std::to_string(expect_d_e) + ")");
    ck.beta_start = parse_hexd(read_value<std::string>(in, "beta_start", path), path);
    ck.beta_end = parse_hexd(read_value<std::string>(in, "beta_end", path), path);
    ck.config_digest = read_value<std::string>(in, "config_digest", path);
    ck.dataset_digest = read_value<std::string>(in, "dataset_digest", path);
    const int64_t step = read_value<int64_t>(in, "step", path);
    const size_t n_params = read_value<size_t>(in, "n_params", path);
    net.params.assign(net.param_count(), 0.0);
    if (n_params != net.params.size())
        throw DataError("checkpoint: parameter count mismatch in " + path);

    ck.state = make_train_state(net, 0);
    ck.state.step = step;
    std::string tok;
    expect_key(in, "params", path);
    for (auto& v : ck.state.net.params) {
        if (!(in >> tok)) throw DataError("checkpoint: truncated params in " + path);
        v = parse_hexd(tok, path);
    }
    expect_key(in, "adam_m", path);
    for (auto& v : ck.state.adam_m) {
        if (!(in >> tok)) throw DataError("checkpoint: truncated adam_m in " + path);
        v = parse_hexd(tok, path);
    }
    expect_key(in, "adam_v", path);
    for (auto& v : ck.state.adam_v) {
        if (!(in >> tok)) throw DataError("checkpoint: truncated adam_v in " + path);
        v = parse_hexd(tok, path);
    }
    expect_key(in, "rng", path);
    if (!(in >> ck.state.rng.engine()))
        throw DataError("checkpoint: bad rng state in " + path);
    expect_key(in, "end", path);
    return ck;
}

}  // namespace diffad
