#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "diffad/common.hpp"
#include "diffad/condition.hpp"
#include "diffad/mixture.hpp"

namespace diffad {

struct PoolEntry {
    std::string keyword;
    std::vector<double> emb;
};

struct KeywordPool {
    std::vector<PoolEntry> entries;
    size_t d_e = 0;
};

// Unique keywords, unit-norm embeddings (1e-9), consistent dimension.
void validate_pool(const KeywordPool& pool);

// Cosine similarity of the image embedding against every pool entry.
std::vector<double> similarities(const std::vector<double>& image_emb,
                                 const KeywordPool& pool);

struct PromptItem {
    std::string keyword;
    int pool_index = 0;
    double similarity = 0.0;
    double weight = 0.0;
};

// Ordered by descending raw similarity (ties: lower pool index first); the
// median-ranked item has weight exactly 1.
struct WeightedPrompt {
    std::vector<PromptItem> items;
};

// Top-k by similarity with weights = similarity / median(selected). k must be
// odd and <= pool size; any non-positive selected similarity is a
// degenerate-pool error (weights must stay positive).
WeightedPrompt select_keywords(const std::vector<double>& sims,
                               const KeywordPool& pool, int k = 5);

// c = sum(w_i e_i) / sum(w_i); an empty prompt yields the null condition.
ConditionEmbedding compose_condition(const WeightedPrompt& prompt,
                                     const KeywordPool& pool);

// Selection counts over a dataset, sorted by count descending then keyword.
std::vector<std::pair<std::string, int>> keyword_frequencies(
    const std::vector<WeightedPrompt>& prompts);

KeywordPool load_pool(const std::string& path);
void save_pool(const KeywordPool& pool, const std::string& path);

// Fixed linear projection of patch latents into embedding space, stored as
// per-latent-coordinate columns; outputs are normalized.
struct EmbeddingProvider {
    std::vector<std::vector<double>> cols;

    size_t dim() const { return cols.size(); }
    size_t d_e() const { return cols.empty() ? 0 : cols[0].size(); }
    std::vector<double> project(const Latent& z) const;
    std::vector<double> image_embed(const Latent& z) const;
};

EmbeddingProvider make_synthetic_provider(size_t dim, size_t d_e, uint64_t seed);
EmbeddingProvider load_provider(const std::string& path);
void save_provider(const EmbeddingProvider& provider, const std::string& path);

// Keyword embeddings clustered around the projected archetype means:
// normalize(P mu_k + pert_scale * noise), per_archetype keywords per
// component, named "a<k>v<i>".
KeywordPool build_synthetic_pool(const EmbeddingProvider& provider,
                                 const ArchetypeMixture& mix, int per_archetype,
                                 double pert_scale, uint64_t seed);

WeightedPrompt derive_prompt(const Latent& z0, const EmbeddingProvider& provider,
                             const KeywordPool& pool, int k = 5);
ConditionEmbedding derive_condition(const Latent& z0,
                                    const EmbeddingProvider& provider,
                                    const KeywordPool& pool, int k = 5);

}  // namespace diffad
