#include "diffad/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "diffad/common.hpp"
#include "diffad/digest.hpp"

namespace diffad {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

struct RawEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

using RawConfig = std::map<std::string, RawEntry>;

RawConfig read_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    RawConfig raw;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (section.empty())
            throw ConfigError(where + ": key outside any [section]");
        const std::string full = section + "." + key;
        if (raw.count(full))
            throw ConfigError(where + ": duplicate key '" + full + "'");
        raw[full] = {trim(line.substr(eq + 1)), lineno, false};
    }
    return raw;
}

class Resolver {
  public:
    Resolver(RawConfig& raw, const std::string& path) : raw_(raw), path_(path) {}

    void get(const std::string& key, int& out) {
        if (RawEntry* e = find(key)) {
            try {
                size_t pos = 0;
                out = std::stoi(e->value, &pos);
                if (pos != e->value.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                fail(key, *e, "an integer");
            }
        }
    }

    void get(const std::string& key, double& out) {
        if (RawEntry* e = find(key)) {
            try {
                size_t pos = 0;
                out = std::stod(e->value, &pos);
                if (pos != e->value.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                fail(key, *e, "a real number");
            }
        }
    }

    void get(const std::string& key, uint64_t& out) {
        if (RawEntry* e = find(key)) {
            try {
                size_t pos = 0;
                out = std::stoull(e->value, &pos);
                if (pos != e->value.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                fail(key, *e, "an unsigned integer");
            }
        }
    }

    void get(const std::string& key, bool& out) {
        if (RawEntry* e = find(key)) {
            if (e->value == "true")
                out = true;
            else if (e->value == "false")
                out = false;
            else
                fail(key, *e, "true or false");
        }
    }

    void get(const std::string& key, std::string& out) {
        if (RawEntry* e = find(key)) out = e->value;
    }

    void check_unused() const {
        for (const auto& [key, entry] : raw_)
            if (!entry.used)
                throw ConfigError(path_ + ":" + std::to_string(entry.line) +
                                  ": unknown key '" + key + "'");
    }

  private:
    RawEntry* find(const std::string& key) {
        auto it = raw_.find(key);
        if (it == raw_.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }

    [[noreturn]] void fail(const std::string& key, const RawEntry& e,
                           const std::string& want) {
        throw ConfigError(path_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "' needs " + want + ", got '" + e.value + "'");
    }

    RawConfig& raw_;
    const std::string& path_;
};

}  // namespace

ExperimentConfig parse_config_file(const std::string& path) {
    RawConfig raw = read_ini(path);
    Resolver r(raw, path);
    ExperimentConfig c;
    r.get("schedule.T", c.T);
    r.get("schedule.beta_start", c.beta_start);
    r.get("schedule.beta_end", c.beta_end);
    r.get("world.K", c.K);
    r.get("world.dim", c.dim);
    r.get("world.d_e", c.d_e);
    r.get("world.radius_normal", c.radius_normal);
    r.get("world.radius_ood", c.radius_ood);
    r.get("world.sigma", c.sigma);
    r.get("world.kappa", c.kappa);
    r.get("world.lat_cos", c.lat_cos);
    r.get("world.emb_cos_max", c.emb_cos_max);
    r.get("world.keywords_per_archetype", c.keywords_per_archetype);
    r.get("world.keyword_pert", c.keyword_pert);
    r.get("data.n_train", c.n_train);
    r.get("data.n_val", c.n_val);
    r.get("data.n_test_in", c.n_test_in);
    r.get("data.n_test_out", c.n_test_out);
    r.get("data.grid_height", c.grid_height);
    r.get("data.grid_width", c.grid_width);
    r.get("data.region_min", c.region_min);
    r.get("data.region_max", c.region_max);
    r.get("data.max_regions", c.max_regions);
    r.get("data.dataset_dir", c.dataset_dir);
    r.get("denoiser.kind", c.denoiser);
    r.get("denoiser.hidden", c.hidden);
    r.get("denoiser.time_features", c.time_features);
    r.get("denoiser.checkpoint_path", c.checkpoint_path);
    r.get("train.steps", c.steps);
    r.get("train.batch_size", c.batch_size);
    r.get("train.lr", c.lr);
    r.get("train.p_drop", c.p_drop);
    r.get("train.resume", c.resume);
    r.get("sampler.kind", c.sampler);
    r.get("sampler.n_steps", c.n_steps);
    r.get("sampler.t_star", c.t_star);
    r.get("prompting.top_k", c.top_k);
    r.get("prompting.keywords_split", c.keywords_split);
    r.get("eval.condition_mode", c.condition_mode);
    r.get("eval.znorm_source", c.znorm_source);
    r.get("eval.sweep_candidates", c.sweep_candidates);
    r.get("eval.heatmaps", c.heatmaps);
    r.get("run.seed", c.seed);
    r.get("run.jobs", c.jobs);
    r.get("run.out_dir", c.out_dir);
    r.check_unused();
    return c;
}

void validate_config(const ExperimentConfig& c) {
    if (c.denoiser != "analytic" && c.denoiser != "trained")
        throw ConfigError("config: denoiser.kind must be analytic or trained");
    if (c.sampler != "plms" && c.sampler != "ancestral")
        throw ConfigError("config: sampler.kind must be plms or ancestral");
    if (c.condition_mode != "conditioned" && c.condition_mode != "null")
        throw ConfigError("config: eval.condition_mode must be conditioned or null");
    if (c.znorm_source != "validation" && c.znorm_source != "test")
        throw ConfigError("config: eval.znorm_source must be validation or test");
    if (c.keywords_split != "train" && c.keywords_split != "val" &&
        c.keywords_split != "test_in" && c.keywords_split != "test_out")
        throw ConfigError("config: prompting.keywords_split must name a split");
    if (c.t_star < 0 || c.t_star > c.T)
        throw ConfigError("config: sampler.t_star must be in [0, T]");
    if (c.n_steps < 1) throw ConfigError("config: sampler.n_steps must be >= 1");
    if (c.jobs < 1) throw ConfigError("config: run.jobs must be >= 1");
    if (c.top_k < 1 || c.top_k % 2 == 0)
        throw ConfigError("config: prompting.top_k must be odd and >= 1");
    if (c.out_dir.empty()) throw ConfigError("config: run.out_dir must be set");
    if (c.steps < 1) throw ConfigError("config: train.steps must be >= 1");
    if (c.batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
    if (!(c.lr > 0.0)) throw ConfigError("config: train.lr must be positive");
    if (c.p_drop < 0.0 || c.p_drop > 1.0)
        throw ConfigError("config: train.p_drop must be in [0, 1]");
    parse_sweep_candidates(c.sweep_candidates);
}

namespace {

std::string render(const ExperimentConfig& c, bool with_run_local) {
    std::ostringstream o;
    o << "[schedule]\n";
    o << "T = " << c.T << "\n";
    o << "beta_start = " << fmt17(c.beta_start) << "\n";
    o << "beta_end = " << fmt17(c.beta_end) << "\n";
    o << "[world]\n";
    o << "K = " << c.K << "\n";
    o << "dim = " << c.dim << "\n";
    o << "d_e = " << c.d_e << "\n";
    o << "radius_normal = " << fmt17(c.radius_normal) << "\n";
    o << "radius_ood = " << fmt17(c.radius_ood) << "\n";
    o << "sigma = " << fmt17(c.sigma) << "\n";
    o << "kappa = " << fmt17(c.kappa) << "\n";
    o << "lat_cos = " << fmt17(c.lat_cos) << "\n";
    o << "emb_cos_max = " << fmt17(c.emb_cos_max) << "\n";
    o << "keywords_per_archetype = " << c.keywords_per_archetype << "\n";
    o << "keyword_pert = " << fmt17(c.keyword_pert) << "\n";
    o << "[data]\n";
    o << "n_train = " << c.n_train << "\n";
    o << "n_val = " << c.n_val << "\n";
    o << "n_test_in = " << c.n_test_in << "\n";
    o << "n_test_out = " << c.n_test_out << "\n";
    o << "grid_height = " << c.grid_height << "\n";
    o << "grid_width = " << c.grid_width << "\n";
    o << "region_min = " << c.region_min << "\n";
    o << "region_max = " << c.region_max << "\n";
    o << "max_regions = " << c.max_regions << "\n";
    o << "dataset_dir = " << c.dataset_dir << "\n";
    o << "[denoiser]\n";
    o << "kind = " << c.denoiser << "\n";
    o << "hidden = " << c.hidden << "\n";
    o << "time_features = " << c.time_features << "\n";
    o << "checkpoint_path = " << c.checkpoint_path << "\n";
    o << "[train]\n";
    o << "steps = " << c.steps << "\n";
    o << "batch_size = " << c.batch_size << "\n";
    o << "lr = " << fmt17(c.lr) << "\n";
    o << "p_drop = " << fmt17(c.p_drop) << "\n";
    if (with_run_local) o << "resume = " << (c.resume ? "true" : "false") << "\n";
    o << "[sampler]\n";
    o << "kind = " << c.sampler << "\n";
    o << "n_steps = " << c.n_steps << "\n";
    o << "t_star = " << c.t_star << "\n";
    o << "[prompting]\n";
    o << "top_k = " << c.top_k << "\n";
    o << "keywords_split = " << c.keywords_split << "\n";
    o << "[eval]\n";
    o << "condition_mode = " << c.condition_mode << "\n";
    o << "znorm_source = " << c.znorm_source << "\n";
    o << "sweep_candidates = " << c.sweep_candidates << "\n";
    o << "heatmaps = " << (c.heatmaps ? "true" : "false") << "\n";
    o << "[run]\n";
    o << "seed = " << c.seed << "\n";
    if (with_run_local) {
        o << "jobs = " << c.jobs << "\n";
        o << "out_dir = " << c.out_dir << "\n";
    }
    return o.str();
}

}  // namespace

std::string canonical_text(const ExperimentConfig& c) {
    return render(c, true);
}

std::string config_digest(const ExperimentConfig& c) {
    return hex64(fnv1a64(render(c, false)));
}

std::string train_digest(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "T = " << c.T << "\n";
    o << "beta_start = " << fmt17(c.beta_start) << "\n";
    o << "beta_end = " << fmt17(c.beta_end) << "\n";
    o << "K = " << c.K << "\n";
    o << "dim = " << c.dim << "\n";
    o << "d_e = " << c.d_e << "\n";
    o << "radius_normal = " << fmt17(c.radius_normal) << "\n";
    o << "radius_ood = " << fmt17(c.radius_ood) << "\n";
    o << "sigma = " << fmt17(c.sigma) << "\n";
    o << "kappa = " << fmt17(c.kappa) << "\n";
    o << "lat_cos = " << fmt17(c.lat_cos) << "\n";
    o << "emb_cos_max = " << fmt17(c.emb_cos_max) << "\n";
    o << "keywords_per_archetype = " << c.keywords_per_archetype << "\n";
    o << "keyword_pert = " << fmt17(c.keyword_pert) << "\n";
    o << "n_train = " << c.n_train << "\n";
    o << "n_val = " << c.n_val << "\n";
    o << "n_test_in = " << c.n_test_in << "\n";
    o << "n_test_out = " << c.n_test_out << "\n";
    o << "grid_height = " << c.grid_height << "\n";
    o << "grid_width = " << c.grid_width << "\n";
    o << "region_min = " << c.region_min << "\n";
    o << "region_max = " << c.region_max << "\n";
    o << "max_regions = " << c.max_regions << "\n";
    o << "denoiser = " << c.denoiser << "\n";
    o << "hidden = " << c.hidden << "\n";
    o << "time_features = " << c.time_features << "\n";
    o << "steps = " << c.steps << "\n";
    o << "batch_size = " << c.batch_size << "\n";
    o << "lr = " << fmt17(c.lr) << "\n";
    o << "p_drop = " << fmt17(c.p_drop) << "\n";
    o << "top_k = " << c.top_k << "\n";
    o << "seed = " << c.seed << "\n";
    return hex64(fnv1a64(o.str()));
}

std::vector<int> parse_sweep_candidates(const std::string& text) {
    std::vector<int> out;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (tok.empty())
            throw ConfigError("config: empty sweep candidate in '" + text + "'");
        try {
            size_t pos = 0;
            out.push_back(std::stoi(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError("config: bad sweep candidate '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError("config: eval.sweep_candidates is empty");
    return out;
}

}  // namespace diffad
