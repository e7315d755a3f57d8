#include "diffad/synthdata.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "diffad/digest.hpp"

namespace diffad {

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test_in: return "test_in";
        case Split::test_out: return "test_out";
    }
    throw InvariantError("split_name: bad split");
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test_in") return Split::test_in;
    if (name == "test_out") return Split::test_out;
    throw DataError("unknown split '" + name + "'");
}

int SlideGrid::n_anomalous() const {
    int n = 0;
    for (uint8_t m : mask) n += m ? 1 : 0;
    return n;
}

void validate_spec(const DatasetSpec& spec) {
    validate_mixture(spec.normal);
    validate_mixture(spec.ood);
    if (spec.normal.dim() != spec.ood.dim())
        throw ConfigError("spec: normal/ood latent dimensions differ");
    if (spec.n_train < 1 || spec.n_val < 1 || spec.n_test_in < 1 ||
        spec.n_test_out < 1)
        throw ConfigError("spec: split counts must be positive");
    if (spec.height < 1 || spec.width < 1)
        throw ConfigError("spec: grid dimensions must be positive");
    if (spec.region_min < 2)
        throw ConfigError("spec: region_min must be >= 2");
    if (spec.region_max < spec.region_min)
        throw ConfigError("spec: region_max must be >= region_min");
    if (spec.region_max > spec.height || spec.region_max > spec.width)
        throw ConfigError("spec: region_max exceeds the grid");
    if (spec.max_regions < 1)
        throw ConfigError("spec: max_regions must be >= 1");

    double sigma_max = 0.0;
    for (const auto& mix : {spec.normal, spec.ood})
        for (const auto& s2 : mix.sigma2)
            for (double v : s2) sigma_max = std::max(sigma_max, std::sqrt(v));
    for (const auto& mo : spec.ood.mu)
        for (const auto& mn : spec.normal.mu)
            if (std::sqrt(squared_distance(mo, mn)) < 4.0 * sigma_max)
                throw ConfigError(
                    "spec: separation audit failed (an OOD mean is closer than "
                    "4 standard deviations to a normal mean)");
}

Latent gen_patch(const ArchetypeMixture& mix, Rng& rng) {
    const double u = rng.uniform();
    int k = mix.K - 1;
    double acc = 0.0;
    for (int i = 0; i < mix.K; ++i) {
        acc += mix.pi[static_cast<size_t>(i)];
        if (u < acc) {
            k = i;
            break;
        }
    }
    const size_t dim = mix.dim();
    Latent z(dim);
    for (size_t i = 0; i < dim; ++i)
        z[i] = mix.mu[static_cast<size_t>(k)][i] +
               std::sqrt(mix.sigma2[static_cast<size_t>(k)][i]) * rng.normal();
    return z;
}

void plant_region(SlideGrid& slide, int r0, int c0, int rh, int rw) {
    if (r0 < 0 || c0 < 0 || rh < 1 || rw < 1 || r0 + rh > slide.height ||
        c0 + rw > slide.width)
        throw DataError("plant_region: region does not fit the grid");
    for (int r = r0; r < r0 + rh; ++r)
        for (int c = c0; c < c0 + rw; ++c) slide.mask[slide.at(r, c)] = 1;
}

SlideGrid gen_slide(const DatasetSpec& spec, Split split,
                    const std::string& slide_id, Rng& rng) {
    SlideGrid slide;
    slide.height = spec.height;
    slide.width = spec.width;
    slide.slide_id = slide_id;
    slide.split = split;
    slide.mask.assign(static_cast<size_t>(spec.height) * spec.width, 0);
    slide.cells.resize(slide.mask.size());

    if (split == Split::test_out) {
        const int n_regions = rng.uniform_int(1, spec.max_regions);
        for (int i = 0; i < n_regions; ++i) {
            const int rh = rng.uniform_int(spec.region_min, spec.region_max);
            const int rw = rng.uniform_int(spec.region_min, spec.region_max);
            const int r0 = rng.uniform_int(0, spec.height - rh);
            const int c0 = rng.uniform_int(0, spec.width - rw);
            plant_region(slide, r0, c0, rh, rw);
        }
    }
    for (size_t i = 0; i < slide.cells.size(); ++i)
        slide.cells[i] = gen_patch(slide.mask[i] ? spec.ood : spec.normal, rng);
    return slide;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string mask_digest(const SlideGrid& slide) {
    std::string bits(slide.mask.size(), '0');
    for (size_t i = 0; i < slide.mask.size(); ++i)
        if (slide.mask[i]) bits[i] = '1';
    return hex64(fnv1a64(bits));
}

constexpr Split kSplits[] = {Split::train, Split::val, Split::test_in,
                             Split::test_out};

int split_count(const DatasetSpec& spec, Split s) {
    switch (s) {
        case Split::train: return spec.n_train;
        case Split::val: return spec.n_val;
        case Split::test_in: return spec.n_test_in;
        case Split::test_out: return spec.n_test_out;
    }
    throw InvariantError("split_count: bad split");
}

}  // namespace

void gen_dataset(const DatasetSpec& spec, const std::string& dir) {
    validate_spec(spec);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "slides", ec);
    if (ec) throw DataError("gen_dataset: cannot create " + dir + ": " + ec.message());

    std::ostringstream manifest;
    manifest << "slide_id,split,n_anomalous_cells,seed,mask_digest\n";
    for (size_t si = 0; si < 4; ++si) {
        const Split split = kSplits[si];
        const int count = split_count(spec, split);
        for (int i = 0; i < count; ++i) {
            char idbuf[64];
            std::snprintf(idbuf, sizeof idbuf, "slide_%s_%03d",
                          split_name(split).c_str(), i);
            const uint64_t slide_seed =
                derive_seed(spec.seed, "slide", si, static_cast<uint64_t>(i));
            Rng rng(slide_seed);
            const SlideGrid slide = gen_slide(spec, split, idbuf, rng);
            save_slide(slide, (fs::path(dir) / "slides" / (slide.slide_id + ".txt")).string());
            manifest << slide.slide_id << "," << split_name(split) << ","
                     << slide.n_anomalous() << "," << slide_seed << ","
                     << mask_digest(slide) << "\n";
        }
    }
    std::ofstream out(fs::path(dir) / "manifest.csv");
    if (!out) throw DataError("gen_dataset: cannot write manifest in " + dir);
    out << manifest.str();
    if (!out) throw DataError("gen_dataset: manifest write failed in " + dir);
}

void save_slide(const SlideGrid& slide, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_slide: cannot open " + path);
    const size_t dim = slide.cells.empty() ? 0 : slide.cells[0].size();
    out << "slide v1\n";
    out << "slide_id " << slide.slide_id << "\n";
    out << "split " << split_name(slide.split) << "\n";
    out << "height " << slide.height << "\n";
    out << "width " << slide.width << "\n";
    out << "dim " << dim << "\n";
    out << "cells\n";
    for (const auto& cell : slide.cells) {
        for (size_t i = 0; i < cell.size(); ++i)
            out << (i ? " " : "") << fmt17(cell[i]);
        out << "\n";
    }
    out << "mask\n";
    for (int r = 0; r < slide.height; ++r) {
        for (int c = 0; c < slide.width; ++c)
            out << (slide.mask[slide.at(r, c)] ? '1' : '0');
        out << "\n";
    }
    out << "end\n";
    if (!out) throw DataError("save_slide: write failed for " + path);
}

SlideGrid load_slide(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_slide: cannot open " + path);
    std::string line, word;
    std::getline(in, line);
    if (line != "slide v1") throw DataError("load_slide: bad header in " + path);
    SlideGrid slide;
    size_t dim = 0;
    auto expect = [&](const std::string& key) {
        if (!(in >> word) || word != key)
            throw DataError("load_slide: expected '" + key + "' in " + path);
    };
    expect("slide_id");
    in >> slide.slide_id;
    expect("split");
    in >> word;
    slide.split = split_from_name(word);
    expect("height");
    in >> slide.height;
    expect("width");
    in >> slide.width;
    expect("dim");
    in >> dim;
    if (!in || slide.height < 1 || slide.width < 1 || dim == 0)
        throw DataError("load_slide: bad dimensions in " + path);
    expect("cells");
    const size_t n = static_cast<size_t>(slide.height) * slide.width;
    slide.cells.assign(n, Latent(dim));
    for (auto& cell : slide.cells)
        for (auto& v : cell)
            if (!(in >> v)) throw DataError("load_slide: truncated cells in " + path);
    expect("mask");
    slide.mask.assign(n, 0);
    for (int r = 0; r < slide.height; ++r) {
        if (!(in >> word) || word.size() != static_cast<size_t>(slide.width))
            throw DataError("load_slide: bad mask row in " + path);
        for (int c = 0; c < slide.width; ++c) {
            if (word[static_cast<size_t>(c)] != '0' && word[static_cast<size_t>(c)] != '1')
                throw DataError("load_slide: bad mask character in " + path);
            slide.mask[slide.at(r, c)] = word[static_cast<size_t>(c)] == '1' ? 1 : 0;
        }
    }
    expect("end");
    return slide;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_manifest: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "slide_id,split,n_anomalous_cells,seed,mask_digest")
        throw DataError("load_manifest: bad header in " + path);
    Manifest m;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id, split, n_anom, seed, digest;
        if (!std::getline(row, id, ',') || !std::getline(row, split, ',') ||
            !std::getline(row, n_anom, ',') || !std::getline(row, seed, ',') ||
            !std::getline(row, digest))
            throw DataError("load_manifest: " + path + ":" +
                            std::to_string(lineno) + ": malformed row");
        ManifestRow r;
        r.slide_id = id;
        r.split = split_from_name(split);
        try {
            r.n_anomalous_cells = std::stoi(n_anom);
            r.seed = std::stoull(seed);
        } catch (const std::exception&) {
            throw DataError("load_manifest: " + path + ":" +
                            std::to_string(lineno) + ": bad number");
        }
        r.mask_digest = digest;
        m.rows.push_back(std::move(r));
    }
    if (m.rows.empty()) throw DataError("load_manifest: no rows in " + path);
    return m;
}

namespace {

// K unit directions with every pairwise cosine exactly lat_cos: the simplex
// frame f_k = e_k - mean(e) over the first K axes (pairwise cosine
// -1/(K-1)) blended with the shared axis e_K, which raises the cosine to
// (1-s)(-1/(K-1)) + s for blend weight s.
std::vector<Latent> archetype_directions(int K, int dim, double lat_cos) {
    std::vector<Latent> dirs;
    if (K == 1) {
        Latent d(static_cast<size_t>(dim), 0.0);
        d[0] = 1.0;
        dirs.push_back(std::move(d));
        return dirs;
    }
    const double simplex_cos = -1.0 / (K - 1);
    if (!(lat_cos >= simplex_cos) || !(lat_cos < 1.0))
        throw ConfigError("build_world: lat_cos must be in [-1/(K-1), 1)");
    const double s = (lat_cos * (K - 1) + 1.0) / K;
    const double f_norm = std::sqrt(1.0 - 1.0 / K);
    for (int k = 0; k < K; ++k) {
        Latent d(static_cast<size_t>(dim), 0.0);
        for (int i = 0; i < K; ++i)
            d[static_cast<size_t>(i)] =
                ((i == k ? 1.0 : 0.0) - 1.0 / K) / f_norm * std::sqrt(1.0 - s);
        d[static_cast<size_t>(K)] = std::sqrt(s);
        dirs.push_back(std::move(d));
    }
    return dirs;
}

}  // namespace

SyntheticWorld build_world(const WorldParams& params) {
    if (params.K < 1 || params.dim < 1 || params.d_e < 1)
        throw ConfigError("build_world: dimensions must be positive");
    if (params.K + 1 > params.dim)
        throw ConfigError("build_world: need dim >= K + 1 for the archetype frame");
    if (!(params.emb_cos_max > 0.0) || !(params.emb_cos_max <= 1.0))
        throw ConfigError("build_world: emb_cos_max must be in (0, 1]");
    if (!(params.radius_ood > params.radius_normal) || !(params.radius_normal > 0.0))
        throw ConfigError("build_world: need radius_ood > radius_normal > 0");
    if (!(params.sigma > 0.0)) throw ConfigError("build_world: sigma must be positive");

    const std::vector<Latent> dirs =
        archetype_directions(params.K, params.dim, params.lat_cos);
    std::vector<Latent> mu;
    for (const auto& d : dirs) {
        Latent m = d;
        for (auto& x : m) x *= params.radius_normal;
        mu.push_back(std::move(m));
    }

    SyntheticWorld world;
    std::vector<std::vector<double>> emb;
    bool found = false;
    for (uint64_t attempt = 0; attempt < 1000 && !found; ++attempt) {
        EmbeddingProvider provider = make_synthetic_provider(
            static_cast<size_t>(params.dim), static_cast<size_t>(params.d_e),
            derive_seed(params.seed, "provider", attempt));
        emb.clear();
        bool ok = true;
        for (const auto& m : mu) {
            std::vector<double> e = provider.project(m);
            const double en = norm(e);
            if (en < 1e-12) {
                ok = false;
                break;
            }
            for (auto& x : e) x /= en;
            emb.push_back(std::move(e));
        }
        for (size_t a = 0; a < emb.size() && ok; ++a)
            for (size_t b = a + 1; b < emb.size() && ok; ++b)
                ok = dot(emb[a], emb[b]) <= params.emb_cos_max;
        if (ok) {
            world.provider = std::move(provider);
            found = true;
        }
    }
    if (!found)
        throw InvariantError(
            "build_world: no embedding provider passed the archetype cosine "
            "audit; raise emb_cos_max");

    auto make_mix = [&](double radius) {
        ArchetypeMixture mix;
        mix.K = params.K;
        mix.kappa = params.kappa;
        mix.pi.assign(static_cast<size_t>(params.K), 1.0 / params.K);
        mix.archetype_emb = emb;
        mix.sigma2.assign(
            static_cast<size_t>(params.K),
            std::vector<double>(static_cast<size_t>(params.dim),
                                params.sigma * params.sigma));
        mix.mu.resize(static_cast<size_t>(params.K));
        const double scale = radius / params.radius_normal;
        for (int k = 0; k < params.K; ++k) {
            mix.mu[static_cast<size_t>(k)] = mu[static_cast<size_t>(k)];
            for (auto& x : mix.mu[static_cast<size_t>(k)]) x *= scale;
        }
        validate_mixture(mix);
        return mix;
    };
    world.normal = make_mix(params.radius_normal);
    world.ood = make_mix(params.radius_ood);
    world.pool = build_synthetic_pool(world.provider, world.normal,
                                      params.keywords_per_archetype,
                                      params.keyword_pert,
                                      derive_seed(params.seed, "pool"));
    return world;
}

}  // namespace diffad
