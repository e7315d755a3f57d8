#pragma once

#include <cstdint>
#include <string>

#include "diffad/common.hpp"
#include "diffad/mixture.hpp"
#include "diffad/prompting.hpp"
#include "diffad/rng.hpp"

namespace diffad {

enum class Split { train, val, test_in, test_out };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct SlideGrid {
    int height = 0;
    int width = 0;
    std::vector<Latent> cells;   // row-major
    std::vector<uint8_t> mask;   // row-major, 1 = anomalous
    std::string slide_id;
    Split split = Split::train;

    size_t n_cells() const { return cells.size(); }
    size_t at(int r, int c) const {
        return static_cast<size_t>(r) * width + static_cast<size_t>(c);
    }
    int n_anomalous() const;
};

struct DatasetSpec {
    ArchetypeMixture normal;
    ArchetypeMixture ood;
    int n_train = 200;
    int n_val = 20;
    int n_test_in = 20;
    int n_test_out = 20;
    int height = 32;
    int width = 32;
    int region_min = 2;
    int region_max = 8;
    int max_regions = 3;
    uint64_t seed = 0;
};

// Validates counts, region geometry against the grid, both mixtures, and the
// separation audit: every OOD mean at least 4 max-per-dimension standard
// deviations from every normal mean.
void validate_spec(const DatasetSpec& spec);

Latent gen_patch(const ArchetypeMixture& mix, Rng& rng);

// Marks a rectangle in the mask; throws if it does not fit the grid.
void plant_region(SlideGrid& slide, int r0, int c0, int rh, int rw);

SlideGrid gen_slide(const DatasetSpec& spec, Split split,
                    const std::string& slide_id, Rng& rng);

struct ManifestRow {
    std::string slide_id;
    Split split = Split::train;
    int n_anomalous_cells = 0;
    uint64_t seed = 0;
    std::string mask_digest;
};

struct Manifest {
    std::vector<ManifestRow> rows;
};

// Writes slides/<id>.txt for every slide plus manifest.csv under dir.
// Regeneration from the same spec is byte-identical.
void gen_dataset(const DatasetSpec& spec, const std::string& dir);

void save_slide(const SlideGrid& slide, const std::string& path);
SlideGrid load_slide(const std::string& path);
Manifest load_manifest(const std::string& path);

// Derived world: the two mixtures plus the embedding provider and keyword
// pool, all a pure function of the parameters.
struct WorldParams {
    int K = 4;
    int dim = 8;
    int d_e = 16;
    double radius_normal = 3.0;
    double radius_ood = 7.5;
    double sigma = 0.2;
    double kappa = 12.0;
    // Pairwise cosine between archetype directions in latent space; must be
    // >= -1/(K-1). Negative values separate the components enough that a
    // wrong-archetype reconstruction scores above a nearest-OOD one.
    double lat_cos = -0.25;
    // Provider draws are rejected until every pair of projected archetype
    // directions has cosine at most this, keeping conditions discriminative.
    double emb_cos_max = 0.5;
    int keywords_per_archetype = 5;
    double keyword_pert = 0.15;
    uint64_t seed = 0;
};

struct SyntheticWorld {
    ArchetypeMixture normal;
    ArchetypeMixture ood;
    EmbeddingProvider provider;
    KeywordPool pool;
};

// Archetype directions form an equal-cosine frame (every latent pairwise
// cosine is exactly lat_cos): the K-vector simplex frame over the first K
// coordinates blended with a shared (K+1)-th axis. OOD means are the normal
// means radially rescaled to radius_ood, which bounds their distance to every
// normal mean below by radius_ood - radius_normal. Archetype embeddings are
// the normalized provider projections of the means; the provider seed is
// scanned deterministically until their pairwise cosines pass the
// emb_cos_max audit.
SyntheticWorld build_world(const WorldParams& params);

}  // namespace diffad
