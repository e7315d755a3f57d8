#include "diffad/prompting.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "diffad/rng.hpp"

namespace diffad {

void validate_pool(const KeywordPool& pool) {
    if (pool.entries.empty()) throw DataError("pool: no entries");
    if (pool.d_e == 0) throw DataError("pool: embedding dimension is zero");
    std::set<std::string> seen;
    for (const auto& e : pool.entries) {
        if (!seen.insert(e.keyword).second)
            throw DataError("pool: duplicate keyword '" + e.keyword + "'");
        if (e.emb.size() != pool.d_e)
            throw DataError("pool: inconsistent embedding dimension for '" +
                            e.keyword + "'");
        if (std::abs(norm(e.emb) - 1.0) > 1e-9)
            throw DataError("pool: embedding for '" + e.keyword +
                            "' is not unit-norm");
    }
}

std::vector<double> similarities(const std::vector<double>& image_emb,
                                 const KeywordPool& pool) {
    if (image_emb.size() != pool.d_e)
        throw ConfigError("similarities: embedding dimension mismatch");
    const double n = norm(image_emb);
    if (n == 0.0) throw DataError("similarities: zero-norm image embedding");
    std::vector<double> sims(pool.entries.size());
    for (size_t i = 0; i < pool.entries.size(); ++i)
        sims[i] = dot(image_emb, pool.entries[i].emb) /
                  (n * norm(pool.entries[i].emb));
    return sims;
}

WeightedPrompt select_keywords(const std::vector<double>& sims,
                               const KeywordPool& pool, int k) {
    if (sims.size() != pool.entries.size())
        throw ConfigError("select_keywords: similarity/pool size mismatch");
    if (k < 1 || static_cast<size_t>(k) > pool.entries.size())
        throw ConfigError("select_keywords: k must be in [1, pool size]");
    if (k % 2 == 0) throw ConfigError("select_keywords: k must be odd");

    std::vector<size_t> order(sims.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return a < b;
    });

    const double median = sims[order[static_cast<size_t>(k / 2)]];
    WeightedPrompt prompt;
    prompt.items.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        const size_t idx = order[static_cast<size_t>(i)];
        if (!(sims[idx] > 0.0))
            throw DataError(
                "select_keywords: degenerate pool (non-positive similarity in "
                "the selected top-" +
                std::to_string(k) + ")");
        PromptItem item;
        item.keyword = pool.entries[idx].keyword;
        item.pool_index = static_cast<int>(idx);
        item.similarity = sims[idx];
        item.weight = sims[idx] / median;
        prompt.items.push_back(std::move(item));
    }
    return prompt;
}

ConditionEmbedding compose_condition(const WeightedPrompt& prompt,
                                     const KeywordPool& pool) {
    if (prompt.items.empty()) return null_condition(pool.d_e);
    std::map<std::string, const PoolEntry*> by_name;
    for (const auto& e : pool.entries) by_name[e.keyword] = &e;
    ConditionEmbedding c;
    c.values.assign(pool.d_e, 0.0);
    c.is_null = false;
    double wsum = 0.0;
    for (const auto& item : prompt.items) {
        auto it = by_name.find(item.keyword);
        if (it == by_name.end())
            throw ConfigError("compose_condition: keyword '" + item.keyword +
                              "' not in pool");
        for (size_t i = 0; i < pool.d_e; ++i)
            c.values[i] += item.weight * it->second->emb[i];
        wsum += item.weight;
    }
    for (auto& v : c.values) v /= wsum;
    return c;
}

std::vector<std::pair<std::string, int>> keyword_frequencies(
    const std::vector<WeightedPrompt>& prompts) {
    std::map<std::string, int> counts;
    for (const auto& p : prompts)
        for (const auto& item : p.items) ++counts[item.keyword];
    std::vector<std::pair<std::string, int>> table(counts.begin(), counts.end());
    std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return table;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Shared reader for the embeddings file format: "dim=<d_e>" header, then
// one "<name>\t<floats space-separated>" row per entry.
std::vector<PoolEntry> read_embedding_rows(const std::string& path, size_t& d_e) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embeddings file " + path);
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw DataError(path + ":1: missing header");
    ++lineno;
    if (line.rfind("dim=", 0) != 0)
        throw DataError(path + ":1: header must be 'dim=<d_e>'");
    try {
        d_e = static_cast<size_t>(std::stoul(line.substr(4)));
    } catch (const std::exception&) {
        throw DataError(path + ":1: bad dimension in header");
    }
    if (d_e == 0) throw DataError(path + ":1: dimension must be positive");

    std::vector<PoolEntry> entries;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(where + ": missing TAB separator");
        PoolEntry e;
        e.keyword = line.substr(0, tab);
        if (e.keyword.empty()) throw DataError(where + ": empty keyword");
        std::istringstream row(line.substr(tab + 1));
        double v = 0.0;
        while (row >> v) e.emb.push_back(v);
        if (!row.eof()) throw DataError(where + ": malformed float");
        if (e.emb.size() != d_e)
            throw DataError(where + ": expected " + std::to_string(d_e) +
                            " values, got " + std::to_string(e.emb.size()));
        if (!all_finite(e.emb)) throw DataError(where + ": non-finite value");
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw DataError(path + ": no embedding rows");
    return entries;
}

void write_embedding_rows(const std::vector<PoolEntry>& entries, size_t d_e,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "dim=" << d_e << "\n";
    for (const auto& e : entries) {
        out << e.keyword << "\t";
        for (size_t i = 0; i < e.emb.size(); ++i)
            out << (i ? " " : "") << fmt17(e.emb[i]);
        out << "\n";
    }
    if (!out) throw DataError("write failed for " + path);
}

}  // namespace

KeywordPool load_pool(const std::string& path) {
    KeywordPool pool;
    pool.entries = read_embedding_rows(path, pool.d_e);
    validate_pool(pool);
    return pool;
}

void save_pool(const KeywordPool& pool, const std::string& path) {
    write_embedding_rows(pool.entries, pool.d_e, path);
}

std::vector<double> EmbeddingProvider::project(const Latent& z) const {
    if (z.size() != cols.size())
        throw ConfigError("provider: latent dimension mismatch");
    std::vector<double> v(d_e(), 0.0);
    for (size_t j = 0; j < cols.size(); ++j)
        for (size_t i = 0; i < v.size(); ++i) v[i] += z[j] * cols[j][i];
    return v;
}

std::vector<double> EmbeddingProvider::image_embed(const Latent& z) const {
    std::vector<double> v = project(z);
    const double n = norm(v);
    if (n == 0.0) throw DataError("provider: zero-norm image embedding");
    for (auto& x : v) x /= n;
    return v;
}

EmbeddingProvider make_synthetic_provider(size_t dim, size_t d_e, uint64_t seed) {
    if (dim == 0 || d_e == 0)
        throw ConfigError("make_synthetic_provider: dimensions must be positive");
    Rng rng(seed);
    EmbeddingProvider p;
    p.cols.resize(dim);
    for (auto& col : p.cols) col = rng.normal_vec(d_e);
    return p;
}

EmbeddingProvider load_provider(const std::string& path) {
    size_t d_e = 0;
    const std::vector<PoolEntry> rows = read_embedding_rows(path, d_e);
    EmbeddingProvider p;
    p.cols.reserve(rows.size());
    for (const auto& r : rows) p.cols.push_back(r.emb);
    return p;
}

void save_provider(const EmbeddingProvider& provider, const std::string& path) {
    std::vector<PoolEntry> rows(provider.dim());
    for (size_t j = 0; j < provider.dim(); ++j) {
        rows[j].keyword = "c" + std::to_string(j);
        rows[j].emb = provider.cols[j];
    }
    write_embedding_rows(rows, provider.d_e(), path);
}

KeywordPool build_synthetic_pool(const EmbeddingProvider& provider,
                                 const ArchetypeMixture& mix, int per_archetype,
                                 double pert_scale, uint64_t seed) {
    if (per_archetype < 1)
        throw ConfigError("build_synthetic_pool: per_archetype must be >= 1");
    Rng rng(seed);
    KeywordPool pool;
    pool.d_e = provider.d_e();
    for (int k = 0; k < mix.K; ++k) {
        const std::vector<double> base = provider.project(mix.mu[static_cast<size_t>(k)]);
        for (int i = 0; i < per_archetype; ++i) {
            PoolEntry e;
            e.keyword = "a" + std::to_string(k) + "v" + std::to_string(i);
            e.emb.resize(pool.d_e);
            for (size_t j = 0; j < pool.d_e; ++j)
                e.emb[j] = base[j] + pert_scale * rng.normal();
            const double n = norm(e.emb);
            if (n == 0.0)
                throw InvariantError("build_synthetic_pool: zero-norm keyword");
            for (auto& v : e.emb) v /= n;
            pool.entries.push_back(std::move(e));
        }
    }
    validate_pool(pool);
    return pool;
}

WeightedPrompt derive_prompt(const Latent& z0, const EmbeddingProvider& provider,
                             const KeywordPool& pool, int k) {
    return select_keywords(similarities(provider.image_embed(z0), pool), pool, k);
}

ConditionEmbedding derive_condition(const Latent& z0,
                                    const EmbeddingProvider& provider,
                                    const KeywordPool& pool, int k) {
    return compose_condition(derive_prompt(z0, provider, pool, k), pool);
}

}  // namespace diffad
