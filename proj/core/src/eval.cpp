#include "diffad/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "diffad/metrics.hpp"
#include "diffad/parallel.hpp"
#include "json.hpp"

namespace diffad {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

EvalReport evaluate(const std::vector<SlideGrid>& slides, const EpsFn& eps_fn,
                    const EmbeddingProvider& provider, const KeywordPool& pool,
                    const NoiseSchedule& sched, const EvalConfig& cfg) {
    std::vector<size_t> val_idx, test_idx;
    for (size_t i = 0; i < slides.size(); ++i) {
        if (slides[i].split == Split::val) val_idx.push_back(i);
        if (slides[i].split == Split::test_in || slides[i].split == Split::test_out)
            test_idx.push_back(i);
    }
    bool have_in = false, have_out = false;
    for (size_t i : test_idx) {
        have_in = have_in || slides[i].split == Split::test_in;
        have_out = have_out || slides[i].split == Split::test_out;
    }
    if (!have_in || !have_out)
        throw ConfigError("evaluate: need both test_in and test_out slides");
    if (cfg.znorm_validation && val_idx.empty())
        throw ConfigError("evaluate: missing validation split for z-normalization");

    // One work item per (slide, cell); slot writes keep any --jobs value
    // byte-identical.
    std::vector<size_t> work_slides =
        cfg.znorm_validation ? val_idx : std::vector<size_t>{};
    work_slides.insert(work_slides.end(), test_idx.begin(), test_idx.end());
    struct Item {
        size_t slide = 0;
        size_t cell = 0;
    };
    std::vector<Item> items;
    for (size_t si : work_slides)
        for (size_t cell = 0; cell < slides[si].n_cells(); ++cell)
            items.push_back({si, cell});
    std::vector<double> scores(items.size());
    const size_t d_e = pool.d_e;
    parallel_for(items.size(), cfg.jobs, [&](size_t i) {
        const SlideGrid& slide = slides[items[i].slide];
        const Latent& z0 = slide.cells[items[i].cell];
        const ConditionEmbedding c =
            cfg.conditioned ? derive_condition(z0, provider, pool, cfg.top_k)
                            : null_condition(d_e);
        Rng rng(derive_seed(cfg.seed, "recon", items[i].slide, items[i].cell));
        const Latent z0_hat =
            reconstruct(z0, cfg.t_star, c, eps_fn, sched, cfg.n_steps, rng);
        scores[i] = anomaly_score(z0, z0_hat);
    });

    std::vector<double> fit_scores;
    size_t offset = 0;
    std::vector<size_t> item_offset_of_slide(slides.size(), 0);
    for (size_t si : work_slides) {
        item_offset_of_slide[si] = offset;
        offset += slides[si].n_cells();
    }
    if (cfg.znorm_validation) {
        for (size_t si : val_idx)
            for (size_t cell = 0; cell < slides[si].n_cells(); ++cell)
                fit_scores.push_back(scores[item_offset_of_slide[si] + cell]);
    } else {
        for (size_t si : test_idx)
            for (size_t cell = 0; cell < slides[si].n_cells(); ++cell)
                fit_scores.push_back(scores[item_offset_of_slide[si] + cell]);
    }
    EvalReport report;
    report.zstats =
        fit_zstats(fit_scores, cfg.znorm_validation ? "validation" : "test");
    report.mode = cfg.conditioned ? "conditioned" : "null";
    report.t_star = cfg.t_star;

    std::vector<double> patch_pos, patch_neg;
    std::vector<double> zmax_pos, zmax_neg, z99_pos, z99_neg;
    std::vector<double> dices, ious, tnrs;
    for (size_t si : test_idx) {
        const SlideGrid& slide = slides[si];
        ScoreMap raw;
        raw.height = slide.height;
        raw.width = slide.width;
        raw.slide_id = slide.slide_id;
        raw.stage = MapStage::raw;
        raw.values.resize(slide.n_cells());
        for (size_t cell = 0; cell < slide.n_cells(); ++cell)
            raw.values[cell] = scores[item_offset_of_slide[si] + cell];
        const ScoreMap zm = zmap(raw, report.zstats);
        const ScoreMap er = erode(zm);
        const SlideScore ss = slide_scores(er);
        const std::vector<uint8_t> pred = segment(er);

        SlideResult r;
        r.slide_id = slide.slide_id;
        r.split = slide.split;
        r.z_max = ss.z_max;
        r.z_99 = ss.z_99;
        if (slide.split == Split::test_out) {
            const DiceIou di = dice_iou(pred, slide.mask);
            r.dice = di.dice;
            r.iou = di.iou;
            dices.push_back(di.dice);
            ious.push_back(di.iou);
            zmax_pos.push_back(ss.z_max);
            z99_pos.push_back(ss.z_99);
        } else {
            r.tnr = tnr(pred);
            tnrs.push_back(r.tnr);
            zmax_neg.push_back(ss.z_max);
            z99_neg.push_back(ss.z_99);
        }
        report.slides.push_back(r);

        for (int row = 0; row < slide.height; ++row)
            for (int col = 0; col < slide.width; ++col) {
                PatchRow p;
                p.slide_id = slide.slide_id;
                p.row = row;
                p.col = col;
                p.raw_score = raw.values[raw.at(row, col)];
                p.z = zm.values[zm.at(row, col)];
                p.label = slide.mask[slide.at(row, col)] ? 1 : 0;
                (p.label ? patch_pos : patch_neg).push_back(p.z);
                report.patches.push_back(std::move(p));
            }
        report.heatmaps.push_back(raw);
        report.heatmaps.push_back(zm);
        report.heatmaps.push_back(er);
    }

    report.patch_auc = auc(patch_pos, patch_neg);
    report.patch_aupr = aupr(patch_pos, patch_neg);
    report.slide_auc_zmax = auc(zmax_pos, zmax_neg);
    report.slide_aupr_zmax = aupr(zmax_pos, zmax_neg);
    report.slide_auc_z99 = auc(z99_pos, z99_neg);
    report.slide_aupr_z99 = aupr(z99_pos, z99_neg);
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    report.dice_mean = mean_of(dices);
    report.iou_mean = mean_of(ious);
    report.tnr_mean = mean_of(tnrs);
    return report;
}

SweepResult timestep_sweep(const std::vector<SlideGrid>& slides,
                           const EpsFn& eps_fn, const EmbeddingProvider& provider,
                           const KeywordPool& pool, const NoiseSchedule& sched,
                           const EvalConfig& cfg, const std::vector<int>& candidates) {
    if (candidates.empty()) throw ConfigError("timestep_sweep: no candidates");
    for (int t : candidates)
        if (t < 1 || t > sched.T)
            throw ConfigError("timestep_sweep: candidate t_star out of range");
    SweepResult result;
    bool have_best = false;
    double best_auc = 0.0;
    for (int cand : candidates) {
        EvalConfig c = cfg;
        c.t_star = cand;
        const EvalReport report = evaluate(slides, eps_fn, provider, pool, sched, c);
        SweepRow row;
        row.t_star = cand;
        row.slide_auc_z99 = report.slide_auc_z99;
        row.slide_auc_zmax = report.slide_auc_zmax;
        row.patch_auc = report.patch_auc;
        result.rows.push_back(row);
        if (!have_best || row.slide_auc_z99 > best_auc ||
            (row.slide_auc_z99 == best_auc && cand < result.best_t_star)) {
            have_best = true;
            best_auc = row.slide_auc_z99;
            result.best_t_star = cand;
        }
    }
    return result;
}

void write_report_json(const EvalReport& report, const std::string& path) {
    nlohmann::ordered_json j;
    j["config_digest"] = report.config_digest;
    j["mode"] = report.mode;
    j["t_star"] = report.t_star;
    j["zstats"] = {{"mean", report.zstats.mean},
                   {"std", report.zstats.std},
                   {"source", report.zstats.source}};
    j["metrics"] = {{"patch_auc", report.patch_auc},
                    {"patch_aupr", report.patch_aupr},
                    {"slide_auc_zmax", report.slide_auc_zmax},
                    {"slide_aupr_zmax", report.slide_aupr_zmax},
                    {"slide_auc_z99", report.slide_auc_z99},
                    {"slide_aupr_z99", report.slide_aupr_z99},
                    {"dice_mean", report.dice_mean},
                    {"iou_mean", report.iou_mean},
                    {"tnr_mean", report.tnr_mean}};
    j["slides"] = nlohmann::ordered_json::array();
    for (const auto& s : report.slides) {
        nlohmann::ordered_json row;
        row["slide_id"] = s.slide_id;
        row["split"] = split_name(s.split);
        row["z_max"] = s.z_max;
        row["z_99"] = s.z_99;
        if (s.split == Split::test_out) {
            row["dice"] = s.dice;
            row["iou"] = s.iou;
        } else {
            row["tnr"] = s.tnr;
        }
        j["slides"].push_back(row);
    }
    std::ofstream out(path);
    if (!out) throw DataError("write_report_json: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out) throw DataError("write_report_json: write failed for " + path);
}

void write_patch_scores_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_patch_scores_csv: cannot open " + path);
    if (!report.config_digest.empty())
        out << "# config_digest=" << report.config_digest << "\n";
    out << "slide_id,row,col,raw_score,z,label\n";
    for (const auto& p : report.patches)
        out << p.slide_id << "," << p.row << "," << p.col << ","
            << fmt17(p.raw_score) << "," << fmt17(p.z) << "," << p.label << "\n";
    if (!out) throw DataError("write_patch_scores_csv: write failed for " + path);
}

void write_heatmap_csv(const ScoreMap& map, const std::string& path,
                       const std::string& digest) {
    std::ofstream out(path);
    if (!out) throw DataError("write_heatmap_csv: cannot open " + path);
    if (!digest.empty()) out << "# config_digest=" << digest << "\n";
    for (int r = 0; r < map.height; ++r) {
        for (int c = 0; c < map.width; ++c)
            out << (c ? "," : "") << fmt17(map.values[map.at(r, c)]);
        out << "\n";
    }
    if (!out) throw DataError("write_heatmap_csv: write failed for " + path);
}

void write_heatmap_pgm(const ScoreMap& map, const std::string& path,
                       const std::string& digest) {
    std::ofstream out(path);
    if (!out) throw DataError("write_heatmap_pgm: cannot open " + path);
    const double lo = *std::min_element(map.values.begin(), map.values.end());
    const double hi = *std::max_element(map.values.begin(), map.values.end());
    const double span = hi > lo ? hi - lo : 1.0;
    out << "P2\n";
    if (!digest.empty()) out << "# config_digest=" << digest << "\n";
    out << map.width << " " << map.height << "\n255\n";
    for (int r = 0; r < map.height; ++r) {
        for (int c = 0; c < map.width; ++c) {
            const int gray = static_cast<int>(
                std::lround(255.0 * (map.values[map.at(r, c)] - lo) / span));
            out << (c ? " " : "") << gray;
        }
        out << "\n";
    }
    if (!out) throw DataError("write_heatmap_pgm: write failed for " + path);
}

}  // namespace diffad
