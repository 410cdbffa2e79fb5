#include "bindelta/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>

#include "bindelta/kernels.hpp"
#include "bindelta/version.hpp"

namespace bindelta::experiment {

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"variant", "K", "alpha", "gamma", "seed", "epochs", "batch_size",
                         "lr", "lr_decay", "val_fraction", "trials", "compose_mode",
                         "bin_selection", "clip_gradients", "bin_hidden", "delta_hidden",
                         "regressor_hidden", "dataset", "out_dir", "k_list",
                         "sweep_parameter", "sweep_values", "median_rule"},
                        "top level");
    ExperimentConfig c;
    if (j.contains("variant")) {
        const auto name = j["variant"].get<std::string>();
        const auto v = models::parse_variant(name);
        if (!v) throw std::invalid_argument("config: unknown variant '" + name + "'");
        c.variant = *v;
    }
    c.k = j.value("K", c.k);
    c.alpha = j.value("alpha", c.alpha);
    c.gamma = j.value("gamma", c.gamma);
    c.seed = j.value("seed", c.seed);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.trials = j.value("trials", c.trials);
    c.compose_mode = j.value("compose_mode", c.compose_mode);
    c.bin_selection = j.value("bin_selection", c.bin_selection);
    if (j.contains("clip_gradients")) c.clip_gradients = j["clip_gradients"].get<bool>();
    if (j.contains("bin_hidden")) c.bin_hidden = j["bin_hidden"].get<std::vector<std::size_t>>();
    if (j.contains("delta_hidden"))
        c.delta_hidden = j["delta_hidden"].get<std::vector<std::size_t>>();
    if (j.contains("regressor_hidden"))
        c.regressor_hidden = j["regressor_hidden"].get<std::vector<std::size_t>>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("k_list")) c.k_list = j["k_list"].get<std::vector<std::size_t>>();
    c.sweep_parameter = j.value("sweep_parameter", c.sweep_parameter);
    if (j.contains("sweep_values"))
        c.sweep_values = j["sweep_values"].get<std::vector<double>>();
    c.median_rule = j.value("median_rule", c.median_rule);

    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        reject_unknown_keys(d,
                            {"source", "csv_path", "feature_dim", "n_samples", "noise_std",
                             "symmetry_order", "pose_dist", "mixture_modes", "mixture_std",
                             "symmetry_bias", "seed"},
                            "dataset");
        c.dataset.source = d.value("source", c.dataset.source);
        c.dataset.csv_path = d.value("csv_path", c.dataset.csv_path);
        auto& s = c.dataset.synth;
        s.feature_dim = d.value("feature_dim", s.feature_dim);
        s.n_samples = d.value("n_samples", s.n_samples);
        s.noise_std = d.value("noise_std", s.noise_std);
        s.symmetry_order = d.value("symmetry_order", s.symmetry_order);
        if (d.contains("pose_dist")) {
            const auto pd = d["pose_dist"].get<std::string>();
            if (pd == "uniform") s.pose_dist = data::PoseDistribution::uniform;
            else if (pd == "mixture") s.pose_dist = data::PoseDistribution::mixture;
            else throw std::invalid_argument("config: pose_dist must be uniform|mixture");
        }
        s.mixture_modes = d.value("mixture_modes", s.mixture_modes);
        s.mixture_std = d.value("mixture_std", s.mixture_std);
        s.symmetry_bias = d.value("symmetry_bias", s.symmetry_bias);
        if (d.contains("seed")) {
            s.seed = d["seed"].get<std::uint64_t>();
            c.dataset.seed_set = true;
        }
        if (c.dataset.source != "synthetic" && c.dataset.source != "csv")
            throw std::invalid_argument("config: dataset.source must be synthetic|csv");
        if (c.dataset.source == "csv" && c.dataset.csv_path.empty())
            throw std::invalid_argument("config: dataset.source=csv requires csv_path");
    }

    if (c.compose_mode != "default" && c.compose_mode != "additive" &&
        c.compose_mode != "riemannian")
        throw std::invalid_argument("config: compose_mode must be default|additive|riemannian");
    if (c.bin_selection != "teacher_forced" && c.bin_selection != "predicted")
        throw std::invalid_argument("config: bin_selection must be teacher_forced|predicted");
    if (c.median_rule != "lower_middle" && c.median_rule != "interpolated")
        throw std::invalid_argument("config: median_rule must be lower_middle|interpolated");
    if (j.contains("trials") && c.trials == 0)
        throw std::invalid_argument("config: trials must be >= 1");
    return c;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path.string());
    nlohmann::json j;
    is >> j;
    return parse_config(j);
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["variant"] = std::string(models::variant_name(c.variant));
    j["K"] = c.k;
    j["alpha"] = c.alpha;
    j["gamma"] = c.gamma;
    j["seed"] = c.seed;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["lr_decay"] = c.lr_decay;
    j["val_fraction"] = c.val_fraction;
    if (c.trials > 0) j["trials"] = c.trials;
    j["compose_mode"] = c.compose_mode;
    j["bin_selection"] = c.bin_selection;
    if (c.clip_gradients) j["clip_gradients"] = *c.clip_gradients;
    j["bin_hidden"] = c.bin_hidden;
    if (!c.delta_hidden.empty()) j["delta_hidden"] = c.delta_hidden;
    j["regressor_hidden"] = c.regressor_hidden;
    j["median_rule"] = c.median_rule;
    if (!c.out_dir.empty()) j["out_dir"] = c.out_dir.string();
    j["k_list"] = c.k_list;
    if (!c.sweep_parameter.empty()) {
        j["sweep_parameter"] = c.sweep_parameter;
        j["sweep_values"] = c.sweep_values;
    }
    nlohmann::json d;
    d["source"] = c.dataset.source;
    if (!c.dataset.csv_path.empty()) d["csv_path"] = c.dataset.csv_path;
    const auto& s = c.dataset.synth;
    d["feature_dim"] = s.feature_dim;
    d["n_samples"] = s.n_samples;
    d["noise_std"] = s.noise_std;
    d["symmetry_order"] = s.symmetry_order;
    d["pose_dist"] = s.pose_dist == data::PoseDistribution::uniform ? "uniform" : "mixture";
    d["mixture_modes"] = s.mixture_modes;
    d["mixture_std"] = s.mixture_std;
    d["symmetry_bias"] = s.symmetry_bias;
    if (c.dataset.seed_set) d["seed"] = s.seed;
    j["dataset"] = d;
    return j;
}

models::ModelConfig to_model_config(const ExperimentConfig& c, std::size_t feature_dim) {
    models::ModelConfig m = models::default_config(c.variant, feature_dim);
    if (c.k > 0) m.k = c.k;
    if (c.alpha >= 0.0) m.alpha = c.alpha;
    m.gamma = c.gamma;
    if (c.compose_mode == "additive") m.compose_mode = binning::DeltaMode::additive;
    else if (c.compose_mode == "riemannian") m.compose_mode = binning::DeltaMode::riemannian;
    m.bin_selection = c.bin_selection == "predicted" ? models::BinSelection::predicted
                                                     : models::BinSelection::teacher_forced;
    if (c.clip_gradients) m.clip_gradients = *c.clip_gradients;
    m.bin_hidden = c.bin_hidden;
    if (!c.delta_hidden.empty()) m.delta_hidden = c.delta_hidden;
    m.regressor_hidden = c.regressor_hidden;
    return m;
}

models::TrainConfig to_train_config(const ExperimentConfig& c, std::uint64_t seed) {
    models::TrainConfig t;
    t.epochs = c.epochs;
    t.batch_size = c.batch_size;
    t.lr = c.lr;
    t.lr_decay = c.lr_decay;
    t.seed = seed;
    return t;
}

eval::MedianRule median_rule(const ExperimentConfig& c) {
    return c.median_rule == "interpolated" ? eval::MedianRule::interpolated
                                           : eval::MedianRule::lower_middle;
}

data::Dataset load_or_generate(const DatasetConfig& dc, std::uint64_t run_seed) {
    if (dc.source == "csv") return data::load_csv(dc.csv_path, dc.synth.feature_dim);
    data::SynthConfig s = dc.synth;
    if (!dc.seed_set) s.seed = Rng(run_seed).fork("dataset").next_u64();
    return data::generate_synthetic(s);
}

std::filesystem::path default_out_root() {
    if (const char* env = std::getenv("BINDELTA_OUT")) return env;
    return "runs";
}

namespace {

eval::MetricReport evaluate_models(const std::vector<TrainedCategory>& trained,
                                   const data::Dataset& val, eval::MedianRule rule) {
    std::vector<AxisAngle> preds, gts;
    std::vector<int> cats;
    for (const auto& tc : trained) {
        const data::Dataset vc = data::filter_category(val, tc.category);
        for (const auto& s : vc.samples) {
            preds.push_back(models::predict_pose(tc.result.params, s.features));
            gts.push_back(s.pose);
            cats.push_back(s.category);
        }
    }
    return eval::compute_metrics(preds, gts, cats, rule);
}

} // namespace

std::string history_to_csv(const std::vector<TrainedCategory>& models) {
    std::string out = "category,epoch,train_loss,val_mederr_deg,val_acc_pi6,degenerate_count\n";
    for (const auto& tc : models) {
        for (const auto& st : tc.result.history) {
            out += std::to_string(tc.category) + "," + std::to_string(st.epoch) + "," +
                   fmt17(st.train_loss) + "," + fmt17(st.val_mederr_deg) + "," +
                   fmt17(st.val_acc_pi6) + "," + std::to_string(st.degenerate_count) + "\n";
        }
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, const ExperimentConfig& cfg,
                    const std::vector<std::uint64_t>& seeds) {
    nlohmann::json j;
    j["tool"] = "bindelta";
    j["version"] = kVersion;
    j["kernel_backend"] = std::string(kernels::backend_name());
    j["config"] = config_to_json(cfg);
    // fingerprint of the canonical config serialization
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : j["config"].dump()) {
        h ^= std::uint64_t(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    j["config_hash"] = hex;
    j["seeds"] = seeds;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write manifest " + path.string());
    os << j.dump(2) << "\n";
}

void save_bundle(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                 const std::vector<TrainedCategory>& trained) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json meta;
    meta["version"] = kVersion;
    meta["variant"] = std::string(models::variant_name(cfg.variant));
    meta["seed"] = cfg.seed;
    auto cats = nlohmann::json::array();
    for (const auto& tc : trained) {
        const auto& p = tc.result.params;
        const fs::path cdir = dir / ("cat_" + std::to_string(tc.category));
        fs::create_directories(cdir);
        nlohmann::json cj;
        cj["category"] = tc.category;
        cj["K"] = p.cfg.k;
        cj["alpha"] = p.cfg.alpha;
        cj["gamma"] = p.cfg.gamma;
        cj["feature_dim"] = p.cfg.feature_dim;
        cj["compose_mode"] =
            p.cfg.compose_mode == binning::DeltaMode::additive ? "additive" : "riemannian";
        cj["diverged"] = tc.result.diverged;
        if (p.bin) {
            net::save_checkpoint(*p.bin, cdir / "bin.net");
            binning::save_dictionary(p.dict, cdir / "dictionary.json");
        }
        if (p.regressor) net::save_checkpoint(*p.regressor, cdir / "regressor.net");
        for (std::size_t i = 0; i < p.deltas.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "delta_%03zu.net", i);
            net::save_checkpoint(p.deltas[i], cdir / name);
        }
        cj["delta_count"] = p.deltas.size();
        cats.push_back(cj);
    }
    meta["categories"] = cats;
    std::ofstream os(dir / "model.json");
    if (!os) throw std::runtime_error("cannot write bundle metadata");
    os << meta.dump(2) << "\n";
}

std::map<int, models::ModelParams> load_bundle(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::ifstream is(dir / "model.json");
    if (!is) throw std::runtime_error("cannot open bundle " + (dir / "model.json").string());
    nlohmann::json meta;
    is >> meta;
    const auto vname = meta.at("variant").get<std::string>();
    const auto variant = models::parse_variant(vname);
    if (!variant) throw std::runtime_error("bundle: unknown variant " + vname);

    std::map<int, models::ModelParams> out;
    for (const auto& cj : meta.at("categories")) {
        const int cat = cj.at("category").get<int>();
        const fs::path cdir = dir / ("cat_" + std::to_string(cat));
        models::ModelParams p;
        p.cfg.variant = *variant;
        p.cfg.k = cj.at("K").get<std::size_t>();
        p.cfg.alpha = cj.at("alpha").get<double>();
        p.cfg.gamma = cj.at("gamma").get<double>();
        p.cfg.feature_dim = cj.at("feature_dim").get<std::size_t>();
        p.cfg.compose_mode = cj.at("compose_mode").get<std::string>() == "riemannian"
                                 ? binning::DeltaMode::riemannian
                                 : binning::DeltaMode::additive;
        if (fs::exists(cdir / "bin.net")) {
            p.bin = net::load_checkpoint(cdir / "bin.net");
            p.dict = binning::load_dictionary(cdir / "dictionary.json");
        }
        if (fs::exists(cdir / "regressor.net"))
            p.regressor = net::load_checkpoint(cdir / "regressor.net");
        const std::size_t n_deltas = cj.at("delta_count").get<std::size_t>();
        for (std::size_t i = 0; i < n_deltas; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "delta_%03zu.net", i);
            p.deltas.push_back(net::load_checkpoint(cdir / name));
        }
        out.emplace(cat, std::move(p));
    }
    return out;
}

RunOutput run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                       const std::filesystem::path& out_dir) {
    const data::Dataset ds = load_or_generate(cfg.dataset, seed);
    if (ds.size() == 0) throw std::runtime_error("run_training: empty dataset");
    auto [train_split, val_split] =
        data::split(ds, cfg.val_fraction, Rng(seed).fork("split").next_u64());

    RunOutput out;
    for (int cat : ds.category_ids()) {
        const data::Dataset tr = data::filter_category(train_split, cat);
        const data::Dataset va = data::filter_category(val_split, cat);
        if (tr.size() == 0)
            throw std::runtime_error("run_training: category " + std::to_string(cat) +
                                     " has no training samples");
        const models::ModelConfig mcfg = to_model_config(cfg, ds.feature_dim);
        const models::TrainConfig tcfg = to_train_config(cfg, seed);
        TrainedCategory tc;
        tc.category = cat;
        tc.result = models::train(mcfg, tr, va, tcfg);
        out.diverged = out.diverged || tc.result.diverged;
        out.models.push_back(std::move(tc));
    }
    out.report = evaluate_models(out.models, val_split, median_rule(cfg));
    out.report.variant = std::string(models::variant_name(cfg.variant));

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_manifest(out_dir / "manifest.json", cfg, {seed});
        std::ofstream hist(out_dir / "history.csv");
        hist << history_to_csv(out.models);
        eval::emit_report_csv(out.report, out_dir / "report.csv");
        eval::emit_report_json(out.report, out_dir / "report.json");
        save_bundle(out_dir / "model", cfg, out.models);
    }
    return out;
}

int cmd_discretize(const ExperimentConfig& cfg) {
    const data::Dataset ds = load_or_generate(cfg.dataset, cfg.seed);
    if (ds.size() == 0) throw std::runtime_error("discretize: empty dataset");
    const std::filesystem::path out =
        cfg.out_dir.empty() ? default_out_root() / "discretize" : cfg.out_dir;
    std::filesystem::create_directories(out);

    std::string floors = "category,K,floor_median_deg,floor_mean_deg\n";
    for (int cat : ds.category_ids()) {
        const data::Dataset dc = data::filter_category(ds, cat);
        const auto poses = dc.poses();
        for (std::size_t k : cfg.k_list) {
            if (poses.size() < k) continue;
            const auto dict =
                binning::kmeans_fit(poses, k, Rng(cfg.seed).fork("kmeans").next_u64());
            const auto floor = binning::quantization_floor(dict, poses);
            char name[64];
            std::snprintf(name, sizeof name, "dictionary_cat%d_K%zu.json", cat, k);
            binning::save_dictionary(dict, out / name);
            floors += std::to_string(cat) + "," + std::to_string(k) + "," +
                      fmt17(floor.median_deg) + "," + fmt17(floor.mean_deg) + "\n";
        }
    }
    std::ofstream os(out / "floors.csv");
    os << floors;
    write_manifest(out / "manifest.json", cfg, {cfg.seed});
    std::cout << floors;
    return 0;
}

int cmd_train(const ExperimentConfig& raw_cfg) {
    ExperimentConfig cfg = raw_cfg;
    if (cfg.trials == 0) cfg.trials = 1;
    const std::filesystem::path base =
        cfg.out_dir.empty() ? default_out_root() / "train" : cfg.out_dir;
    bool diverged = false;

    if (cfg.trials == 1) {
        const RunOutput out = run_training(cfg, cfg.seed, base);
        diverged = out.diverged;
        std::cout << eval::report_to_csv(out.report);
    } else {
        std::vector<double> means_mederr, means_acc;
        std::vector<std::uint64_t> seeds;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            const std::uint64_t seed = cfg.seed + t;
            seeds.push_back(seed);
            const RunOutput out =
                run_training(cfg, seed, base / ("trial_" + std::to_string(t)));
            diverged = diverged || out.diverged;
            means_mederr.push_back(out.report.mean_mederr_deg);
            means_acc.push_back(out.report.mean_acc);
        }
        double mu_e = 0, mu_a = 0;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            mu_e += means_mederr[t];
            mu_a += means_acc[t];
        }
        mu_e /= double(cfg.trials);
        mu_a /= double(cfg.trials);
        double var_e = 0, var_a = 0;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            var_e += (means_mederr[t] - mu_e) * (means_mederr[t] - mu_e);
            var_a += (means_acc[t] - mu_a) * (means_acc[t] - mu_a);
        }
        const double denom = cfg.trials > 1 ? double(cfg.trials - 1) : 1.0;
        std::filesystem::create_directories(base);
        std::ofstream os(base / "trials.csv");
        std::string agg = "metric,mean,std\n";
        agg += "mederr_deg," + fmt17(mu_e) + "," + fmt17(std::sqrt(var_e / denom)) + "\n";
        agg += "acc_pi6," + fmt17(mu_a) + "," + fmt17(std::sqrt(var_a / denom)) + "\n";
        os << agg;
        write_manifest(base / "manifest.json", cfg, seeds);
        std::cout << agg;
    }
    return diverged ? 2 : 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& model_dir) {
    const auto bundle = load_bundle(model_dir);
    const data::Dataset ds = load_or_generate(cfg.dataset, cfg.seed);

    std::vector<AxisAngle> preds, gts;
    std::vector<int> cats;
    for (const auto& s : ds.samples) {
        const auto it = bundle.find(s.category);
        if (it == bundle.end())
            throw std::runtime_error("eval: no model for category " +
                                     std::to_string(s.category));
        preds.push_back(models::predict_pose(it->second, s.features));
        gts.push_back(s.pose);
        cats.push_back(s.category);
    }
    eval::MetricReport report = eval::compute_metrics(preds, gts, cats, median_rule(cfg));
    report.variant = std::string(models::variant_name(cfg.variant));

    const std::filesystem::path out =
        cfg.out_dir.empty() ? default_out_root() / "eval" : cfg.out_dir;
    std::filesystem::create_directories(out);
    eval::emit_report_csv(report, out / "report.csv");
    eval::emit_report_json(report, out / "report.json");
    std::cout << eval::report_to_csv(report);
    return 0;
}

int cmd_ablate(const ExperimentConfig& raw_cfg) {
    ExperimentConfig cfg = raw_cfg;
    if (cfg.trials == 0) cfg.trials = 3; // the reporting protocol default
    if (cfg.sweep_parameter != "K" && cfg.sweep_parameter != "alpha")
        throw std::invalid_argument("ablate: sweep_parameter must be K or alpha");
    if (cfg.sweep_values.empty())
        throw std::invalid_argument("ablate: empty sweep list");

    const std::filesystem::path base =
        cfg.out_dir.empty() ? default_out_root() / "ablate" : cfg.out_dir;
    std::filesystem::create_directories(base);

    // category columns come from the first run's report
    std::vector<std::string> cat_names;
    std::string table;

    for (double value : cfg.sweep_values) {
        ExperimentConfig point = cfg;
        if (cfg.sweep_parameter == "K") {
            point.k = std::size_t(std::llround(value));
            if (point.k == 0) throw std::invalid_argument("ablate: K must be >= 1");
        } else {
            point.alpha = value;
        }

        std::vector<eval::MetricReport> reports;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            char leaf[64];
            std::snprintf(leaf, sizeof leaf, "%s_%g_trial_%zu",
                          cfg.sweep_parameter.c_str(), value, t);
            const RunOutput out = run_training(point, cfg.seed + t, base / leaf);
            reports.push_back(out.report);
        }

        if (cat_names.empty()) {
            table = "setting,metric";
            for (const auto& c : reports[0].categories) {
                cat_names.push_back(c.name);
                table += "," + c.name;
            }
            table += ",mean,std\n";
        }

        const auto aggregate = [&](auto metric_of_cat, auto mean_of_report) {
            std::string row;
            for (std::size_t ci = 0; ci < cat_names.size(); ++ci) {
                double acc = 0.0;
                for (const auto& r : reports) acc += metric_of_cat(r.categories[ci]);
                row += "," + fmt17(acc / double(reports.size()));
            }
            double mu = 0.0;
            for (const auto& r : reports) mu += mean_of_report(r);
            mu /= double(reports.size());
            double var = 0.0;
            for (const auto& r : reports)
                var += (mean_of_report(r) - mu) * (mean_of_report(r) - mu);
            const double sd =
                reports.size() > 1 ? std::sqrt(var / double(reports.size() - 1)) : 0.0;
            row += "," + fmt17(mu) + "," + fmt17(sd);
            return row;
        };

        char setting[48];
        std::snprintf(setting, sizeof setting, "%s=%g", cfg.sweep_parameter.c_str(), value);
        table += std::string(setting) + ",mederr_deg" +
                 aggregate([](const eval::CategoryMetrics& c) { return c.mederr_deg; },
                           [](const eval::MetricReport& r) { return r.mean_mederr_deg; }) +
                 "\n";
        table += std::string(setting) + ",acc_pi6" +
                 aggregate([](const eval::CategoryMetrics& c) { return c.acc_pi6; },
                           [](const eval::MetricReport& r) { return r.mean_acc; }) +
                 "\n";
    }

    std::ofstream os(base / "ablation.csv");
    os << table;
    write_manifest(base / "manifest.json", cfg, {cfg.seed});
    std::cout << table;
    return 0;
}

} // namespace bindelta::experiment
