#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "diffad/prompting.hpp"
#include "diffad/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace diffad;

namespace {

KeywordPool axis_pool() {
    // four unit vectors in d_e = 2 plus two diagonals
    KeywordPool pool;
    pool.d_e = 2;
    const double r = std::sqrt(0.5);
    pool.entries = {
        {"east", {1.0, 0.0}},  {"north", {0.0, 1.0}}, {"west", {-1.0, 0.0}},
        {"south", {0.0, -1.0}}, {"ne", {r, r}},        {"se", {r, -r}},
    };
    validate_pool(pool);
    return pool;
}

}  // namespace

TEST_CASE("pool validation") {
    KeywordPool pool = axis_pool();
    CHECK_NOTHROW(validate_pool(pool));

    SUBCASE("duplicate keyword") {
        pool.entries[1].keyword = "east";
        CHECK_THROWS_AS(validate_pool(pool), DataError);
    }
    SUBCASE("non-unit embedding") {
        pool.entries[2].emb = {0.5, 0.0};
        CHECK_THROWS_AS(validate_pool(pool), DataError);
    }
    SUBCASE("inconsistent dimension") {
        pool.entries[3].emb = {0.0, -1.0, 0.0};
        CHECK_THROWS_AS(validate_pool(pool), DataError);
    }
}

TEST_CASE("similarities hand cases") {
    const KeywordPool pool = axis_pool();

    SUBCASE("self, orthogonal, and 45-degree cosines") {
        const auto sims = similarities({1.0, 0.0}, pool);
        REQUIRE(sims.size() == 6);
        CHECK(sims[0] == doctest::Approx(1.0).epsilon(1e-12));       // self
        CHECK(sims[1] == doctest::Approx(0.0).epsilon(1e-12));       // orthogonal
        CHECK(sims[2] == doctest::Approx(-1.0).epsilon(1e-12));      // opposite
        CHECK(sims[4] == doctest::Approx(0.7071).epsilon(1e-4));     // 45 degrees
        CHECK(sims[4] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
        for (double s : sims) {
            CHECK(s >= -1.0 - 1e-12);
            CHECK(s <= 1.0 + 1e-12);
        }
    }
    SUBCASE("unnormalized image embeddings still give cosines") {
        const auto a = similarities({1.0, 0.0}, pool);
        const auto b = similarities({7.5, 0.0}, pool);
        for (size_t i = 0; i < a.size(); ++i)
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
    SUBCASE("zero-norm image embedding is degenerate") {
        CHECK_THROWS_AS(similarities({0.0, 0.0}, pool), DataError);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(similarities({1.0, 0.0, 0.0}, pool), ConfigError);
    }
}

TEST_CASE("select_keywords hand cases") {
    const KeywordPool pool = axis_pool();

    SUBCASE("spec arithmetic: sims {0.9,...,0.4}, k=5, median 0.7") {
        const std::vector<double> sims = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
        const WeightedPrompt p = select_keywords(sims, pool, 5);
        REQUIRE(p.items.size() == 5);
        const double want[5] = {9.0 / 7.0, 8.0 / 7.0, 1.0, 6.0 / 7.0, 5.0 / 7.0};
        const double approx[5] = {1.2857, 1.1429, 1.0, 0.8571, 0.7143};
        for (size_t i = 0; i < 5; ++i) {
            CHECK(p.items[i].pool_index == static_cast<int>(i));
            CHECK(p.items[i].weight == doctest::Approx(want[i]).epsilon(1e-14));
            CHECK(p.items[i].weight == doctest::Approx(approx[i]).epsilon(1e-4));
        }
        CHECK(p.items[2].weight == 1.0);  // median pivot is exact
    }
    SUBCASE("all similarities equal: every weight exactly 1") {
        const std::vector<double> sims(6, 0.3);
        const WeightedPrompt p = select_keywords(sims, pool, 5);
        for (const auto& item : p.items) CHECK(item.weight == 1.0);
        // ties broken by pool order
        for (size_t i = 0; i < 5; ++i)
            CHECK(p.items[i].pool_index == static_cast<int>(i));
    }
    SUBCASE("tie at rank 5 goes to the lower pool index") {
        const std::vector<double> sims = {0.9, 0.8, 0.7, 0.6, 0.5, 0.5};
        const WeightedPrompt p = select_keywords(sims, pool, 5);
        CHECK(p.items[4].pool_index == 4);
        CHECK(p.items[4].keyword == "ne");
    }
    SUBCASE("selection sorted by descending similarity") {
        const std::vector<double> sims = {0.2, 0.9, 0.4, 0.8, 0.3, 0.7};
        const WeightedPrompt p = select_keywords(sims, pool, 5);
        CHECK(p.items[0].keyword == "north");
        CHECK(p.items[1].keyword == "south");
        CHECK(p.items[2].keyword == "se");
        for (size_t i = 1; i < p.items.size(); ++i)
            CHECK(p.items[i].similarity <= p.items[i - 1].similarity);
    }
    SUBCASE("non-positive selected similarity is a degenerate pool") {
        const std::vector<double> sims = {0.9, 0.8, 0.7, 0.6, 0.0, -0.4};
        CHECK_THROWS_AS(select_keywords(sims, pool, 5), DataError);
    }
    SUBCASE("k validation") {
        const std::vector<double> sims(6, 0.5);
        CHECK_THROWS_AS(select_keywords(sims, pool, 4), ConfigError);  // even
        CHECK_THROWS_AS(select_keywords(sims, pool, 7), ConfigError);  // > pool
        CHECK_THROWS_AS(select_keywords(sims, pool, 0), ConfigError);
        CHECK_NOTHROW(select_keywords(sims, pool, 1));
        CHECK_NOTHROW(select_keywords(sims, pool, 3));
    }
    SUBCASE("k=1: the single keyword is its own median, weight 1") {
        const std::vector<double> sims = {0.1, 0.9, 0.2, 0.3, 0.4, 0.5};
        const WeightedPrompt p = select_keywords(sims, pool, 1);
        REQUIRE(p.items.size() == 1);
        CHECK(p.items[0].keyword == "north");
        CHECK(p.items[0].weight == 1.0);
    }
}

TEST_CASE("select_keywords scale invariance and median pivot") {
    const KeywordPool pool = axis_pool();
    Rng rng(97);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> sims(6);
        for (auto& s : sims) s = 0.05 + rng.uniform();  // keep positive
        const WeightedPrompt a = select_keywords(sims, pool, 5);
        CHECK(a.items[2].weight == 1.0);  // rank-3 of 5 pivot

        const double lambda = 0.1 + 5.0 * rng.uniform();
        std::vector<double> scaled = sims;
        for (auto& s : scaled) s *= lambda;
        const WeightedPrompt b = select_keywords(scaled, pool, 5);
        REQUIRE(b.items.size() == a.items.size());
        for (size_t i = 0; i < a.items.size(); ++i) {
            CHECK(b.items[i].pool_index == a.items[i].pool_index);
            CHECK(b.items[i].weight ==
                  doctest::Approx(a.items[i].weight).epsilon(1e-12));
        }
    }
}

TEST_CASE("compose_condition hand cases") {
    const KeywordPool pool = axis_pool();

    SUBCASE("single keyword: normalization cancels the weight") {
        WeightedPrompt p;
        p.items.push_back({"north", 1, 0.9, 17.0});
        const ConditionEmbedding c = compose_condition(p, pool);
        CHECK_FALSE(c.is_null);
        CHECK(c.values[0] == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(c.values[1] == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("equal weights give the arithmetic mean") {
        WeightedPrompt p;
        p.items.push_back({"east", 0, 0.9, 2.5});
        p.items.push_back({"north", 1, 0.8, 2.5});
        const ConditionEmbedding c = compose_condition(p, pool);
        CHECK(c.values[0] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(c.values[1] == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("weights [2,1] on axis embeddings give [2/3, 1/3]") {
        WeightedPrompt p;
        p.items.push_back({"east", 0, 0.9, 2.0});
        p.items.push_back({"north", 1, 0.8, 1.0});
        const ConditionEmbedding c = compose_condition(p, pool);
        CHECK(c.values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
        CHECK(c.values[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
    SUBCASE("empty prompt yields the null condition") {
        WeightedPrompt p;
        const ConditionEmbedding c = compose_condition(p, pool);
        CHECK(c.is_null);
        for (double v : c.values) CHECK(v == 0.0);
        CHECK(c.values.size() == pool.d_e);
    }
    SUBCASE("missing keyword is an error") {
        WeightedPrompt p;
        p.items.push_back({"nowhere", 0, 0.9, 1.0});
        CHECK_THROWS_AS(compose_condition(p, pool), ConfigError);
    }
    SUBCASE("uniform weight rescaling leaves the condition unchanged") {
        WeightedPrompt p;
        p.items.push_back({"east", 0, 0.9, 1.3});
        p.items.push_back({"ne", 4, 0.8, 0.6});
        p.items.push_back({"south", 3, 0.7, 2.2});
        const ConditionEmbedding a = compose_condition(p, pool);
        for (auto& item : p.items) item.weight *= 7.25;
        const ConditionEmbedding b = compose_condition(p, pool);
        for (size_t i = 0; i < a.values.size(); ++i)
            CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("keyword_frequencies") {
    SUBCASE("empty list gives an empty table") {
        CHECK(keyword_frequencies({}).empty());
    }
    SUBCASE("one prompt with 5 keywords gives five singleton counts") {
        WeightedPrompt p;
        for (int i = 0; i < 5; ++i)
            p.items.push_back({"kw" + std::to_string(i), i, 0.5, 1.0});
        const auto table = keyword_frequencies({p});
        REQUIRE(table.size() == 5);
        for (const auto& [kw, count] : table) CHECK(count == 1);
    }
    SUBCASE("counts match an independent recount, order is (count desc, keyword)") {
        const KeywordPool pool = axis_pool();
        Rng rng(111);
        std::vector<WeightedPrompt> prompts;
        std::map<std::string, int> recount;
        for (int i = 0; i < 100; ++i) {
            std::vector<double> sims(6);
            for (auto& s : sims) s = 0.05 + rng.uniform();
            prompts.push_back(select_keywords(sims, pool, 3));
            for (const auto& item : prompts.back().items) ++recount[item.keyword];
        }
        const auto table = keyword_frequencies(prompts);
        REQUIRE(table.size() == recount.size());
        int total = 0;
        for (size_t i = 0; i < table.size(); ++i) {
            CHECK(recount.at(table[i].first) == table[i].second);
            total += table[i].second;
            if (i > 0) {
                const bool ordered =
                    table[i - 1].second > table[i].second ||
                    (table[i - 1].second == table[i].second &&
                     table[i - 1].first < table[i].first);
                CHECK(ordered);
            }
        }
        CHECK(total == 300);
    }
}

TEST_CASE("embeddings file round-trip and parse errors") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "diffad_test_pool";
    fs::create_directories(dir);
    const std::string path = (dir / "pool.txt").string();

    SUBCASE("round-trip preserves the pool to 1e-9") {
        Rng rng(131);
        KeywordPool pool;
        pool.d_e = 4;
        for (int i = 0; i < 5; ++i) {
            PoolEntry e;
            e.keyword = "kw " + std::to_string(i);  // keywords may contain spaces
            e.emb = rng.normal_vec(4);
            const double n = norm(e.emb);
            for (auto& v : e.emb) v /= n;
            pool.entries.push_back(e);
        }
        validate_pool(pool);
        save_pool(pool, path);
        const KeywordPool back = load_pool(path);
        REQUIRE(back.entries.size() == pool.entries.size());
        CHECK(back.d_e == 4);
        for (size_t i = 0; i < pool.entries.size(); ++i) {
            CHECK(back.entries[i].keyword == pool.entries[i].keyword);
            for (size_t j = 0; j < 4; ++j)
                CHECK(std::abs(back.entries[i].emb[j] - pool.entries[i].emb[j]) <=
                      1e-9);
        }
    }
    SUBCASE("wrong column count names the line") {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fprintf(f, "dim=3\n");
        std::fprintf(f, "good\t1 0 0\n");
        std::fprintf(f, "bad\t1 0\n");
        std::fclose(f);
        try {
            load_pool(path);
            FAIL("expected a parse error");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(":3") != std::string::npos);
        }
    }
    SUBCASE("missing TAB names the line") {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fprintf(f, "dim=2\n");
        std::fprintf(f, "notabs 1 0\n");
        std::fclose(f);
        try {
            load_pool(path);
            FAIL("expected a parse error");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }
    SUBCASE("bad header") {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fprintf(f, "d=2\n");
        std::fclose(f);
        CHECK_THROWS_AS(load_pool(path), DataError);
    }
    SUBCASE("malformed float names the line") {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fprintf(f, "dim=2\n");
        std::fprintf(f, "kw\t0.5 zebra\n");
        std::fclose(f);
        try {
            load_pool(path);
            FAIL("expected a parse error");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("synthetic provider") {
    const EmbeddingProvider p = make_synthetic_provider(8, 16, 424242);
    CHECK(p.dim() == 8);
    CHECK(p.d_e() == 16);

    SUBCASE("image embeddings are unit-norm and deterministic") {
        Rng rng(7);
        const Latent z = rng.normal_vec(8);
        const auto a = p.image_embed(z);
        CHECK(std::abs(norm(a) - 1.0) <= 1e-9);
        const EmbeddingProvider q = make_synthetic_provider(8, 16, 424242);
        const auto b = q.image_embed(z);
        CHECK(a == b);
        const EmbeddingProvider r = make_synthetic_provider(8, 16, 424243);
        CHECK(r.image_embed(z) != a);
    }
    SUBCASE("project is linear") {
        Rng rng(9);
        const Latent x = rng.normal_vec(8), y = rng.normal_vec(8);
        Latent xy(8);
        for (size_t i = 0; i < 8; ++i) xy[i] = x[i] + 2.0 * y[i];
        const auto px = p.project(x), py = p.project(y), pxy = p.project(xy);
        for (size_t j = 0; j < 16; ++j)
            CHECK(pxy[j] == doctest::Approx(px[j] + 2.0 * py[j]).epsilon(1e-12));
    }
    SUBCASE("provider file round-trip") {
        namespace fs = std::filesystem;
        const fs::path path = fs::temp_directory_path() / "diffad_test_provider.txt";
        save_provider(p, path.string());
        const EmbeddingProvider back = load_provider(path.string());
        REQUIRE(back.dim() == p.dim());
        REQUIRE(back.d_e() == p.d_e());
        Rng rng(13);
        const Latent z = rng.normal_vec(8);
        const auto a = p.image_embed(z), b = back.image_embed(z);
        for (size_t j = 0; j < 16; ++j) CHECK(std::abs(a[j] - b[j]) <= 1e-9);
        fs::remove(path);
    }
    SUBCASE("zero latent has no direction") {
        CHECK_THROWS_AS(p.image_embed(Latent(8, 0.0)), DataError);
    }
}

TEST_CASE("build_synthetic_pool structure") {
    const EmbeddingProvider provider = make_synthetic_provider(4, 8, 55);
    ArchetypeMixture mix;
    mix.K = 2;
    mix.pi = {0.5, 0.5};
    mix.mu = {{3.0, 0.0, 0.0, 0.0}, {0.0, 3.0, 0.0, 0.0}};
    mix.sigma2 = {std::vector<double>(4, 0.04), std::vector<double>(4, 0.04)};
    mix.archetype_emb = {provider.image_embed(mix.mu[0]),
                         provider.image_embed(mix.mu[1])};
    mix.kappa = 8.0;
    validate_mixture(mix);

    const KeywordPool pool = build_synthetic_pool(provider, mix, 3, 0.1, 77);
    CHECK_NOTHROW(validate_pool(pool));
    REQUIRE(pool.entries.size() == 6);
    CHECK(pool.d_e == 8);
    // names are a<k>v<i> and keywords cluster around their archetype
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 3; ++i) {
            const auto& e = pool.entries[static_cast<size_t>(k * 3 + i)];
            CHECK(e.keyword == "a" + std::to_string(k) + "v" + std::to_string(i));
            CHECK(dot(e.emb, mix.archetype_emb[static_cast<size_t>(k)]) > 0.8);
        }
    // deterministic in the seed
    const KeywordPool again = build_synthetic_pool(provider, mix, 3, 0.1, 77);
    for (size_t i = 0; i < pool.entries.size(); ++i)
        CHECK(pool.entries[i].emb == again.entries[i].emb);
}

TEST_CASE("derive_prompt and derive_condition agree with manual composition") {
    const EmbeddingProvider provider = make_synthetic_provider(4, 8, 55);
    ArchetypeMixture mix;
    mix.K = 2;
    mix.pi = {0.5, 0.5};
    mix.mu = {{3.0, 0.0, 0.0, 0.0}, {0.0, 3.0, 0.0, 0.0}};
    mix.sigma2 = {std::vector<double>(4, 0.04), std::vector<double>(4, 0.04)};
    mix.archetype_emb = {provider.image_embed(mix.mu[0]),
                         provider.image_embed(mix.mu[1])};
    mix.kappa = 8.0;
    const KeywordPool pool = build_synthetic_pool(provider, mix, 3, 0.1, 77);

    Rng rng(88);
    Latent z = mix.mu[0];
    for (auto& x : z) x += 0.2 * rng.normal();

    const WeightedPrompt p = derive_prompt(z, provider, pool, 3);
    REQUIRE(p.items.size() == 3);
    const auto sims = similarities(provider.image_embed(z), pool);
    const WeightedPrompt manual = select_keywords(sims, pool, 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(p.items[i].keyword == manual.items[i].keyword);
        CHECK(p.items[i].weight == manual.items[i].weight);
    }
    const ConditionEmbedding c = derive_condition(z, provider, pool, 3);
    const ConditionEmbedding manual_c = compose_condition(manual, pool);
    CHECK(c.values == manual_c.values);
    CHECK_FALSE(c.is_null);
}
