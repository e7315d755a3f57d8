#include "diffad/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "diffad/config.hpp"
#include "diffad/digest.hpp"
#include "diffad/eval.hpp"
#include "diffad/mixture.hpp"
#include "diffad/net.hpp"
#include "diffad/prompting.hpp"
#include "diffad/sampler.hpp"
#include "diffad/schedule.hpp"
#include "diffad/synthdata.hpp"

namespace fs = std::filesystem;

namespace diffad {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct RunPaths {
    std::string out;
    std::string dataset;
    std::string train;
    std::string eval;
    std::string sweep;
    std::string keywords;
    std::string checkpoint;
};

RunPaths resolve_paths(const ExperimentConfig& cfg) {
    RunPaths p;
    p.out = cfg.out_dir;
    p.dataset = cfg.dataset_dir.empty() ? p.out + "/dataset" : cfg.dataset_dir;
    p.train = p.out + "/train";
    p.eval = p.out + "/eval";
    p.sweep = p.out + "/sweep";
    p.keywords = p.out + "/keywords";
    p.checkpoint = cfg.checkpoint_path.empty() ? p.train + "/checkpoint.txt"
                                               : cfg.checkpoint_path;
    return p;
}

// Run directories are write-once: an existing non-empty target is refused
// unless the caller passed --overwrite, in which case it is replaced whole.
void prepare_dir(const std::string& dir, bool overwrite) {
    std::error_code ec;
    if (fs::exists(dir, ec) && !fs::is_empty(dir, ec)) {
        if (!overwrite)
            throw ConfigError("refusing to reuse non-empty directory " + dir +
                              " (pass --overwrite to replace it)");
        fs::remove_all(dir, ec);
        if (ec)
            throw DataError("cannot clear directory " + dir + ": " + ec.message());
    }
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return hex64(fnv1a64(buf.str()));
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "# config_digest=" << config_digest(cfg) << "\n" << canonical_text(cfg);
    if (!out) throw DataError("write failed for " + path);
}

WorldParams world_params(const ExperimentConfig& cfg) {
    WorldParams w;
    w.K = cfg.K;
    w.dim = cfg.dim;
    w.d_e = cfg.d_e;
    w.radius_normal = cfg.radius_normal;
    w.radius_ood = cfg.radius_ood;
    w.sigma = cfg.sigma;
    w.kappa = cfg.kappa;
    w.lat_cos = cfg.lat_cos;
    w.emb_cos_max = cfg.emb_cos_max;
    w.keywords_per_archetype = cfg.keywords_per_archetype;
    w.keyword_pert = cfg.keyword_pert;
    w.seed = cfg.seed;
    return w;
}

struct LoadedWorld {
    Manifest manifest;
    EmbeddingProvider provider;
    KeywordPool pool;
    std::string dataset_digest;
};

LoadedWorld load_world(const std::string& dataset_dir) {
    LoadedWorld w;
    w.manifest = load_manifest(dataset_dir + "/manifest.csv");
    w.provider = load_provider(dataset_dir + "/provider.txt");
    w.pool = load_pool(dataset_dir + "/pool.txt");
    w.dataset_digest = file_digest(dataset_dir + "/manifest.csv");
    return w;
}

std::vector<SlideGrid> load_split_slides(const Manifest& manifest,
                                         const std::string& dataset_dir,
                                         bool include_train) {
    std::vector<SlideGrid> slides;
    for (const auto& row : manifest.rows) {
        if (!include_train && row.split == Split::train) continue;
        slides.push_back(load_slide(dataset_dir + "/slides/" + row.slide_id + ".txt"));
    }
    return slides;
}

// The eps predictor the sampler consumes: either the closed-form mixture
// oracle or the trained network from a checkpoint whose training digest and
// dataset digest both match the current run.
EpsFn make_eps_fn(const ExperimentConfig& cfg, const RunPaths& paths,
                  const NoiseSchedule& sched, const std::string& dataset_digest) {
    if (cfg.denoiser == "analytic") {
        auto mix = std::make_shared<ArchetypeMixture>(
            load_mixture(paths.dataset + "/normal_mixture.json"));
        return [mix, &sched](const Latent& z_t, int t, const ConditionEmbedding& c) {
            return analytic_eps(z_t, t, c, *mix, sched);
        };
    }
    auto ck = std::make_shared<Checkpoint>(
        load_checkpoint(paths.checkpoint, cfg.dim, cfg.d_e));
    if (ck->config_digest != train_digest(cfg))
        throw ConfigError("checkpoint " + paths.checkpoint +
                          " was trained under a different config (digest " +
                          ck->config_digest + " vs " + train_digest(cfg) + ")");
    if (ck->dataset_digest != dataset_digest)
        throw ConfigError("checkpoint " + paths.checkpoint +
                          " was trained on a different dataset (digest " +
                          ck->dataset_digest + " vs " + dataset_digest + ")");
    if (ck->beta_start != cfg.beta_start || ck->beta_end != cfg.beta_end)
        throw ConfigError("checkpoint schedule differs from the configured one");
    return [ck](const Latent& z_t, int t, const ConditionEmbedding& c) {
        return net_forward(ck->state.net, z_t, t, c);
    };
}

EvalConfig make_eval_config(const ExperimentConfig& cfg) {
    EvalConfig e;
    e.t_star = cfg.t_star;
    e.n_steps = cfg.n_steps;
    e.conditioned = cfg.condition_mode == "conditioned";
    e.top_k = cfg.top_k;
    e.znorm_validation = cfg.znorm_source == "validation";
    e.seed = cfg.seed;
    e.jobs = cfg.jobs;
    return e;
}

int cmd_gen(const ExperimentConfig& cfg, bool overwrite) {
    const RunPaths paths = resolve_paths(cfg);
    prepare_dir(paths.dataset, overwrite);
    const SyntheticWorld world = build_world(world_params(cfg));
    DatasetSpec spec;
    spec.normal = world.normal;
    spec.ood = world.ood;
    spec.n_train = cfg.n_train;
    spec.n_val = cfg.n_val;
    spec.n_test_in = cfg.n_test_in;
    spec.n_test_out = cfg.n_test_out;
    spec.height = cfg.grid_height;
    spec.width = cfg.grid_width;
    spec.region_min = cfg.region_min;
    spec.region_max = cfg.region_max;
    spec.max_regions = cfg.max_regions;
    spec.seed = cfg.seed;
    gen_dataset(spec, paths.dataset);
    save_mixture(world.normal, paths.dataset + "/normal_mixture.json");
    save_mixture(world.ood, paths.dataset + "/ood_mixture.json");
    save_provider(world.provider, paths.dataset + "/provider.txt");
    save_pool(world.pool, paths.dataset + "/pool.txt");
    write_resolved_config(cfg, paths.dataset + "/config.ini");
    const Manifest manifest = load_manifest(paths.dataset + "/manifest.csv");
    std::cout << "wrote " << manifest.rows.size() << " slides to " << paths.dataset
              << "\n";
    std::cout << "manifest digest " << file_digest(paths.dataset + "/manifest.csv")
              << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, bool overwrite) {
    if (cfg.denoiser != "trained")
        throw ConfigError("train requires denoiser.kind = trained");
    const RunPaths paths = resolve_paths(cfg);
    const LoadedWorld world = load_world(paths.dataset);
    const NoiseSchedule sched = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end);

    std::vector<TrainItem> items;
    for (const auto& row : world.manifest.rows) {
        if (row.split != Split::train) continue;
        const SlideGrid slide =
            load_slide(paths.dataset + "/slides/" + row.slide_id + ".txt");
        for (const auto& cell : slide.cells) {
            TrainItem item;
            item.z0 = cell;
            item.c = derive_condition(cell, world.provider, world.pool, cfg.top_k);
            items.push_back(std::move(item));
        }
    }
    if (items.empty()) throw DataError("no training slides in " + paths.dataset);

    Checkpoint ck;
    int64_t start_step = 0;
    if (cfg.resume) {
        if (!fs::exists(paths.checkpoint))
            throw ConfigError("resume requested but no checkpoint at " +
                              paths.checkpoint);
        ck = load_checkpoint(paths.checkpoint, cfg.dim, cfg.d_e);
        if (ck.config_digest != train_digest(cfg))
            throw ConfigError("checkpoint was trained under a different config");
        if (ck.dataset_digest != world.dataset_digest)
            throw ConfigError("checkpoint was trained on a different dataset");
        start_step = ck.state.step;
    } else {
        prepare_dir(paths.train, overwrite);
        Rng init_rng(derive_seed(cfg.seed, "init"));
        ck.state = make_train_state(make_net(cfg.dim, cfg.d_e, cfg.time_features,
                                             cfg.hidden, cfg.T, init_rng),
                                    derive_seed(cfg.seed, "train"));
        ck.beta_start = cfg.beta_start;
        ck.beta_end = cfg.beta_end;
        ck.config_digest = train_digest(cfg);
        ck.dataset_digest = world.dataset_digest;
    }

    TrainConfig tc;
    tc.steps = cfg.steps;
    tc.batch_size = cfg.batch_size;
    tc.lr = cfg.lr;
    tc.p_drop = cfg.p_drop;
    std::vector<double> curve;
    train_net(ck.state, items, sched, tc, curve);

    fs::create_directories(paths.train);
    const std::string curve_path = paths.train + "/loss_curve.csv";
    const bool append = cfg.resume && fs::exists(curve_path);
    std::ofstream curve_out(curve_path, append ? std::ios::app : std::ios::out);
    if (!curve_out) throw DataError("cannot write " + curve_path);
    if (!append) {
        curve_out << "# config_digest=" << config_digest(cfg) << "\n";
        curve_out << "step,loss\n";
    }
    for (size_t i = 0; i < curve.size(); ++i)
        curve_out << start_step + 1 + static_cast<int64_t>(i) << ","
                  << fmt17(curve[i]) << "\n";
    curve_out.close();

    save_checkpoint(ck, paths.checkpoint);
    std::cout << "trained to step " << ck.state.step;
    if (!curve.empty()) std::cout << " (last loss " << fmt17(curve.back()) << ")";
    std::cout << "\n";
    std::cout << "checkpoint digest " << file_digest(paths.checkpoint) << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg, bool overwrite) {
    const RunPaths paths = resolve_paths(cfg);
    prepare_dir(paths.eval, overwrite);
    const LoadedWorld world = load_world(paths.dataset);
    const NoiseSchedule sched = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    const EpsFn eps_fn = make_eps_fn(cfg, paths, sched, world.dataset_digest);
    const std::vector<SlideGrid> slides =
        load_split_slides(world.manifest, paths.dataset, false);

    EvalReport report =
        evaluate(slides, eps_fn, world.provider, world.pool, sched,
                 make_eval_config(cfg));
    report.config_digest = config_digest(cfg);

    write_resolved_config(cfg, paths.eval + "/config.ini");
    write_report_json(report, paths.eval + "/report.json");
    write_patch_scores_csv(report, paths.eval + "/patch_scores.csv");
    if (cfg.heatmaps) {
        const std::string dir = paths.eval + "/heatmaps";
        fs::create_directories(dir);
        for (const auto& map : report.heatmaps) {
            const std::string base = dir + "/" + map.slide_id + "_" +
                                     stage_name(map.stage);
            write_heatmap_csv(map, base + ".csv", report.config_digest);
            if (map.stage == MapStage::eroded)
                write_heatmap_pgm(map, base + ".pgm", report.config_digest);
        }
    }
    std::cout << "mode " << report.mode << " t_star " << report.t_star << "\n";
    std::cout << "patch auc " << fmt17(report.patch_auc) << " aupr "
              << fmt17(report.patch_aupr) << "\n";
    std::cout << "slide auc z_max " << fmt17(report.slide_auc_zmax) << " z_99 "
              << fmt17(report.slide_auc_z99) << "\n";
    std::cout << "dice " << fmt17(report.dice_mean) << " iou "
              << fmt17(report.iou_mean) << " tnr " << fmt17(report.tnr_mean)
              << "\n";
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, bool overwrite) {
    const RunPaths paths = resolve_paths(cfg);
    prepare_dir(paths.sweep, overwrite);
    const LoadedWorld world = load_world(paths.dataset);
    const NoiseSchedule sched = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    const EpsFn eps_fn = make_eps_fn(cfg, paths, sched, world.dataset_digest);
    const std::vector<SlideGrid> slides =
        load_split_slides(world.manifest, paths.dataset, false);
    const std::vector<int> candidates = parse_sweep_candidates(cfg.sweep_candidates);

    const SweepResult result = timestep_sweep(slides, eps_fn, world.provider,
                                              world.pool, sched,
                                              make_eval_config(cfg), candidates);

    write_resolved_config(cfg, paths.sweep + "/config.ini");
    const std::string table_path = paths.sweep + "/sweep.csv";
    std::ofstream out(table_path);
    if (!out) throw DataError("cannot write " + table_path);
    out << "# config_digest=" << config_digest(cfg) << "\n";
    out << "t_star,slide_auc_z99,slide_auc_zmax,patch_auc\n";
    for (const auto& row : result.rows)
        out << row.t_star << "," << fmt17(row.slide_auc_z99) << ","
            << fmt17(row.slide_auc_zmax) << "," << fmt17(row.patch_auc) << "\n";
    if (!out) throw DataError("write failed for " + table_path);
    out.close();
    std::ofstream best(paths.sweep + "/best_t_star.txt");
    best << result.best_t_star << "\n";

    for (const auto& row : result.rows)
        std::cout << "t_star " << row.t_star << " slide auc z_99 "
                  << fmt17(row.slide_auc_z99) << "\n";
    std::cout << "best t_star " << result.best_t_star << "\n";
    return 0;
}

int cmd_keywords(const ExperimentConfig& cfg, bool overwrite) {
    const RunPaths paths = resolve_paths(cfg);
    prepare_dir(paths.keywords, overwrite);
    const LoadedWorld world = load_world(paths.dataset);
    const Split split = split_from_name(cfg.keywords_split);

    std::vector<WeightedPrompt> prompts;
    for (const auto& row : world.manifest.rows) {
        if (row.split != split) continue;
        const SlideGrid slide =
            load_slide(paths.dataset + "/slides/" + row.slide_id + ".txt");
        for (const auto& cell : slide.cells)
            prompts.push_back(
                derive_prompt(cell, world.provider, world.pool, cfg.top_k));
    }
    if (prompts.empty())
        throw DataError("no slides in split " + cfg.keywords_split);
    const auto freqs = keyword_frequencies(prompts);

    write_resolved_config(cfg, paths.keywords + "/config.ini");
    const std::string csv_path = paths.keywords + "/keyword_frequencies.csv";
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write " + csv_path);
    out << "# config_digest=" << config_digest(cfg) << "\n";
    out << "keyword,count\n";
    for (const auto& [keyword, count] : freqs)
        out << keyword << "," << count << "\n";
    if (!out) throw DataError("write failed for " + csv_path);

    std::cout << "top keywords (" << cfg.keywords_split << "):\n";
    for (size_t i = 0; i < freqs.size() && i < 10; ++i)
        std::cout << freqs[i].first << " " << freqs[i].second << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"conditioned latent-diffusion anomaly detection"};
    app.require_subcommand(0, 1);

    std::string config_path;
    uint64_t seed = 0;
    int jobs = 1;
    std::string out_dir;
    std::string mode;
    bool overwrite = false;
    bool print_config = false;

    auto* opt_config = app.add_option("--config", config_path,
                                      "experiment config file (INI)");
    auto* opt_seed = app.add_option("--seed", seed, "global seed override");
    auto* opt_jobs = app.add_option("--jobs", jobs, "worker threads");
    auto* opt_out = app.add_option("--out", out_dir, "output directory override");
    auto* opt_mode = app.add_option("--mode", mode, "condition mode override")
                         ->check(CLI::IsMember({"conditioned", "null"}));
    app.add_flag("--overwrite", overwrite,
                 "replace an existing non-empty output directory");
    app.add_flag("--print-config", print_config,
                 "print the fully resolved config and exit");

    for (const char* name : {"gen", "train", "eval", "sweep", "keywords"})
        app.add_subcommand(name)->fallthrough();
    app.get_subcommand("gen")->description("generate the synthetic dataset");
    app.get_subcommand("train")->description("train the denoiser network");
    app.get_subcommand("eval")->description("run the evaluation protocol");
    app.get_subcommand("sweep")->description("sweep reconstruction timesteps");
    app.get_subcommand("keywords")->description("keyword selection frequencies");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg;
        if (opt_config->count()) cfg = parse_config_file(config_path);
        if (opt_seed->count()) cfg.seed = seed;
        if (opt_jobs->count()) cfg.jobs = jobs;
        if (opt_out->count()) cfg.out_dir = out_dir;
        if (opt_mode->count()) cfg.condition_mode = mode;
        validate_config(cfg);

        if (print_config) {
            std::cout << canonical_text(cfg);
            return 0;
        }
        const auto subs = app.get_subcommands();
        if (subs.empty()) {
            std::cerr << "error: expected a subcommand "
                         "(gen | train | eval | sweep | keywords)\n";
            return 1;
        }
        const std::string name = subs[0]->get_name();
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (name == "gen") return cmd_gen(cfg, overwrite);
        if (name == "train") return cmd_train(cfg, overwrite);
        if (name == "eval") return cmd_eval(cfg, overwrite);
        if (name == "sweep") return cmd_sweep(cfg, overwrite);
        return cmd_keywords(cfg, overwrite);
    } catch (const InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("diffad");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace diffad
