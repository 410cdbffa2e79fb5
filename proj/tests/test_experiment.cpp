#include <doctest.h>
#include <stdexcept>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bindelta/experiment.hpp"
#include "bindelta/kernels.hpp"
#include "bindelta/net.hpp"
#include "bindelta/rng.hpp"
#include "bindelta/selftest.hpp"

using namespace bindelta;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("experiment");

namespace {

fs::path fresh_dir(const char* name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is.good());
    std::stringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

experiment::ExperimentConfig tiny_config(models::Variant v) {
    experiment::ExperimentConfig cfg;
    cfg.variant = v;
    cfg.k = 4;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 13;
    cfg.bin_hidden = {16, 8};
    cfg.delta_hidden = {8};
    cfg.regressor_hidden = {16, 8};
    cfg.dataset.synth.n_samples = 160;
    cfg.dataset.synth.feature_dim = 16;
    return cfg;
}

} // namespace

TEST_CASE("config parser rejects unknown keys and bad values") {
    CHECK_THROWS_WITH_AS(experiment::parse_config({{"variatn", "M_G"}}),
                         doctest::Contains("unknown key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        experiment::parse_config({{"dataset", {{"sourc", "synthetic"}}}}),
        doctest::Contains("unknown key"), std::invalid_argument);
    CHECK_THROWS_AS(experiment::parse_config({{"variant", "M_X"}}), std::invalid_argument);
    CHECK_THROWS_AS(experiment::parse_config({{"compose_mode", "polar"}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(experiment::parse_config({{"dataset", {{"source", "csv"}}}}),
                    std::invalid_argument); // csv without path
    CHECK_THROWS_AS(experiment::parse_config({{"trials", 0}}), std::invalid_argument);
    CHECK_NOTHROW(experiment::parse_config(nlohmann::json::object()));
}

TEST_CASE("config json roundtrip preserves every field") {
    experiment::ExperimentConfig cfg = tiny_config(models::Variant::MPp);
    cfg.alpha = 2.5;
    cfg.gamma = 0.7;
    cfg.compose_mode = "riemannian";
    cfg.bin_selection = "predicted";
    cfg.clip_gradients = true;
    cfg.sweep_parameter = "alpha";
    cfg.sweep_values = {0.1, 1.0, 10.0};
    cfg.dataset.synth.symmetry_order = 2;
    cfg.dataset.synth.symmetry_bias = 0.65;
    cfg.dataset.seed_set = true;
    cfg.dataset.synth.seed = 321;

    const auto back = experiment::parse_config(experiment::config_to_json(cfg));
    CHECK(back.variant == cfg.variant);
    CHECK(back.k == cfg.k);
    CHECK(back.alpha == cfg.alpha);
    CHECK(back.gamma == cfg.gamma);
    CHECK(back.compose_mode == cfg.compose_mode);
    CHECK(back.bin_selection == cfg.bin_selection);
    CHECK(back.clip_gradients == cfg.clip_gradients);
    CHECK(back.sweep_values == cfg.sweep_values);
    CHECK(back.dataset.synth.symmetry_order == 2);
    CHECK(back.dataset.synth.symmetry_bias == 0.65);
    CHECK(back.dataset.seed_set);
    CHECK(back.dataset.synth.seed == 321);
}

TEST_CASE("model config resolution applies variant defaults and overrides") {
    experiment::ExperimentConfig cfg;
    cfg.variant = models::Variant::MR;
    cfg.k = 0;      // default
    cfg.alpha = -1; // default
    const auto m = experiment::to_model_config(cfg, 32);
    CHECK(m.k == 100);
    CHECK(m.alpha == 0.1);
    CHECK(m.compose_mode == binning::DeltaMode::riemannian);
    CHECK(m.feature_dim == 32);

    cfg.k = 7;
    cfg.alpha = 3.0;
    cfg.compose_mode = "additive";
    cfg.clip_gradients = true;
    const auto m2 = experiment::to_model_config(cfg, 32);
    CHECK(m2.k == 7);
    CHECK(m2.alpha == 3.0);
    CHECK(m2.compose_mode == binning::DeltaMode::additive);
    CHECK(m2.clip_gradients);
}

TEST_CASE("run_training writes a complete, reloadable run directory") {
    const fs::path out = fresh_dir("bindelta_run_test");
    experiment::ExperimentConfig cfg = tiny_config(models::Variant::MS);
    const auto run = experiment::run_training(cfg, cfg.seed, out);
    CHECK_FALSE(run.diverged);
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "history.csv"));
    CHECK(fs::exists(out / "report.csv"));
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "model" / "model.json"));
    CHECK(fs::exists(out / "model" / "cat_0" / "bin.net"));
    CHECK(fs::exists(out / "model" / "cat_0" / "dictionary.json"));
    CHECK(fs::exists(out / "model" / "cat_0" / "delta_000.net"));

    // the saved bundle reproduces in-memory predictions exactly
    const auto bundle = experiment::load_bundle(out / "model");
    REQUIRE(bundle.count(0) == 1);
    const auto ds = experiment::load_or_generate(cfg.dataset, cfg.seed);
    for (int i = 0; i < 5; ++i) {
        const auto& s = ds.samples[std::size_t(i)];
        const auto a = models::predict_pose(run.models[0].result.params, s.features);
        const auto b = models::predict_pose(bundle.at(0), s.features);
        CHECK(a.x == b.x);
        CHECK(a.y == b.y);
        CHECK(a.z == b.z);
    }

    // manifest echoes the config, seeds, backend, and a config fingerprint
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest.at("config").at("variant") == "M_S");
    CHECK(manifest.at("version").is_string());
    CHECK(manifest.contains("kernel_backend"));
    CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
    CHECK(manifest.at("seeds") == nlohmann::json::array({cfg.seed}));
    fs::remove_all(out);
}

TEST_CASE("identical config and seed produce byte-identical history files") {
    const fs::path o1 = fresh_dir("bindelta_det1"), o2 = fresh_dir("bindelta_det2");
    experiment::ExperimentConfig cfg = tiny_config(models::Variant::MG);
    cfg.epochs = 3;
    experiment::run_training(cfg, cfg.seed, o1);
    experiment::run_training(cfg, cfg.seed, o2);
    CHECK(slurp(o1 / "history.csv") == slurp(o2 / "history.csv"));
    CHECK(slurp(o1 / "report.csv") == slurp(o2 / "report.csv"));
    fs::remove_all(o1);
    fs::remove_all(o2);
}

TEST_CASE("bundle save/load across variant families predicts identically") {
    for (auto v : {models::Variant::RG, models::Variant::C, models::Variant::MGp,
                   models::Variant::MP}) {
        const fs::path out = fresh_dir("bindelta_bundle_roundtrip");
        experiment::ExperimentConfig cfg = tiny_config(v);
        cfg.epochs = 1;
        const auto run = experiment::run_training(cfg, cfg.seed, out);
        const auto bundle = experiment::load_bundle(out / "model");
        const auto ds = experiment::load_or_generate(cfg.dataset, cfg.seed);
        for (int i = 0; i < 3; ++i) {
            const auto& s = ds.samples[std::size_t(i)];
            const auto a = models::predict_pose(run.models[0].result.params, s.features);
            const auto b = models::predict_pose(bundle.at(0), s.features);
            CHECK(a.x == b.x);
            CHECK(a.y == b.y);
            CHECK(a.z == b.z);
        }
        fs::remove_all(out);
    }
}

TEST_CASE("fixed-seed run reproduces the stored golden report byte for byte") {
    // pinned to the scalar backend so the bytes match on every machine
    const auto saved = kernels::active();
    kernels::force_backend(kernels::Backend::scalar);

    experiment::ExperimentConfig cfg;
    cfg.variant = models::Variant::MS;
    cfg.k = 4;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 777;
    cfg.lr = 1e-3;
    cfg.lr_decay = 0.9;
    cfg.val_fraction = 0.2;
    cfg.bin_hidden = {16, 8};
    cfg.delta_hidden = {8};
    cfg.dataset.synth.n_samples = 200;
    cfg.dataset.synth.feature_dim = 16;

    const fs::path out = fresh_dir("bindelta_golden_run");
    experiment::run_training(cfg, cfg.seed, out);
    const std::string got = slurp(out / "report.csv");
    const std::string expect = slurp(fs::path(BINDELTA_SOURCE_DIR) / "tests" / "fixtures" /
                                     "golden_report_ms_seed777.csv");
    CHECK(got == expect);
    fs::remove_all(out);
    kernels::force_backend(saved);
}

TEST_CASE("cmd_discretize writes dictionaries and a floor table") {
    const fs::path out = fresh_dir("bindelta_discretize");
    experiment::ExperimentConfig cfg = tiny_config(models::Variant::C);
    cfg.out_dir = out;
    cfg.k_list = {1, 4, 8};
    cfg.dataset.synth.n_samples = 400;
    CHECK(experiment::cmd_discretize(cfg) == 0);
    CHECK(fs::exists(out / "dictionary_cat0_K1.json"));
    CHECK(fs::exists(out / "dictionary_cat0_K4.json"));
    CHECK(fs::exists(out / "dictionary_cat0_K8.json"));
    const std::string floors = slurp(out / "floors.csv");
    CHECK(floors.find("category,K,floor_median_deg,floor_mean_deg") == 0);
    // one header + three rows
    CHECK(std::count(floors.begin(), floors.end(), '\n') == 4);
    fs::remove_all(out);
}

TEST_CASE("cmd_ablate validates the sweep and emits the table") {
    experiment::ExperimentConfig cfg = tiny_config(models::Variant::MS);
    cfg.sweep_parameter = "alpha";
    cfg.sweep_values = {};
    CHECK_THROWS_AS(experiment::cmd_ablate(cfg), std::invalid_argument);
    cfg.sweep_parameter = "epochs";
    cfg.sweep_values = {1.0};
    CHECK_THROWS_AS(experiment::cmd_ablate(cfg), std::invalid_argument);

    const fs::path out = fresh_dir("bindelta_ablate");
    cfg.sweep_parameter = "alpha";
    cfg.sweep_values = {0.5, 2.0};
    cfg.trials = 2;
    cfg.out_dir = out;
    cfg.epochs = 1;
    cfg.dataset.synth.n_samples = 120;
    CHECK(experiment::cmd_ablate(cfg) == 0);
    const std::string table = slurp(out / "ablation.csv");
    CHECK(table.find("setting,metric,0,mean,std") == 0);
    CHECK(table.find("alpha=0.5,mederr_deg") != std::string::npos);
    CHECK(table.find("alpha=0.5,acc_pi6") != std::string::npos);
    CHECK(table.find("alpha=2,mederr_deg") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("cmd_eval scores a saved bundle against a dataset") {
    const fs::path train_out = fresh_dir("bindelta_eval_train");
    experiment::ExperimentConfig cfg = tiny_config(models::Variant::C);
    experiment::run_training(cfg, cfg.seed, train_out);

    const fs::path eval_out = fresh_dir("bindelta_eval_out");
    experiment::ExperimentConfig ecfg = cfg;
    ecfg.out_dir = eval_out;
    CHECK(experiment::cmd_eval(ecfg, train_out / "model") == 0);
    const auto rep = eval::load_report_json(eval_out / "report.json");
    CHECK(rep.categories.size() == 1);
    CHECK(rep.categories[0].count == cfg.dataset.synth.n_samples);
    fs::remove_all(train_out);
    fs::remove_all(eval_out);
}

TEST_CASE("multi-category csv datasets train one model per category") {
    // build a two-category file from two synthetic sets
    data::SynthConfig s0;
    s0.n_samples = 120;
    s0.feature_dim = 16;
    s0.seed = 41;
    data::Dataset ds = data::generate_synthetic(s0);
    data::SynthConfig s1 = s0;
    s1.seed = 47;
    const data::Dataset other = data::generate_synthetic(s1);
    for (auto s : other.samples) {
        s.category = 3;
        ds.samples.push_back(std::move(s));
    }
    const fs::path dir = fresh_dir("bindelta_multicat");
    const fs::path csv = dir / "two_cats.csv";
    data::save_csv(ds, csv);

    experiment::ExperimentConfig cfg = tiny_config(models::Variant::MS);
    cfg.dataset.source = "csv";
    cfg.dataset.csv_path = csv.string();
    cfg.dataset.synth.feature_dim = 16;

    const auto run = experiment::run_training(cfg, cfg.seed, dir / "run");
    REQUIRE(run.models.size() == 2);
    CHECK(run.models[0].category == 0);
    CHECK(run.models[1].category == 3);
    REQUIRE(run.report.categories.size() == 2);
    // unweighted mean over the two categories
    const double expect =
        0.5 * (run.report.categories[0].mederr_deg + run.report.categories[1].mederr_deg);
    CHECK(run.report.mean_mederr_deg == doctest::Approx(expect).epsilon(1e-12));
    CHECK(fs::exists(dir / "run" / "model" / "cat_0" / "bin.net"));
    CHECK(fs::exists(dir / "run" / "model" / "cat_3" / "bin.net"));

    // eval rejects datasets containing categories the bundle lacks
    data::PoseSample orphan = ds.samples[0];
    orphan.category = 9;
    data::Dataset bad = ds;
    bad.samples.push_back(orphan);
    const fs::path bad_csv = dir / "bad.csv";
    data::save_csv(bad, bad_csv);
    experiment::ExperimentConfig ecfg = cfg;
    ecfg.dataset.csv_path = bad_csv.string();
    ecfg.out_dir = dir / "evalout";
    CHECK_THROWS_WITH_AS(experiment::cmd_eval(ecfg, dir / "run" / "model"),
                         doctest::Contains("category 9"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("published head shapes are usable on 2048-dim features") {
    Rng rng(401);
    const std::vector<std::size_t> bin_sizes{2048, 1000, 500, 100};
    const net::MlpParams bin = net::make_mlp(bin_sizes, rng);
    std::vector<double> f(2048);
    for (auto& v : f) v = rng.normal();
    net::GradTape tape;
    const auto logits = net::forward(bin, f, &tape);
    REQUIRE(logits.size() == 100);
    const auto ce = net::softmax_cross_entropy(logits, 7);
    net::MlpGrads g = net::make_grads(bin);
    const auto dx = net::backward(bin, tape, ce.grad, g);
    CHECK(dx.size() == 2048);
    for (double v : ce.grad) CHECK(std::isfinite(v));
}

TEST_CASE("selftest fault injection: a corrupted near-pi log branch is caught and named") {
    selftest::Hooks hooks;
    hooks.log_map = [](const RotationMatrix& r) {
        AxisAngle y = so3::log_map(r);
        if (norm(y) > so3::kPi - 1e-4) return AxisAngle{-y.x, -y.y, -y.z}; // wrong sign
        return y;
    };
    const auto broken = selftest::check_so3_roundtrip(2000, so3::kPi - 1e-3, 1e-9, hooks);
    CHECK_FALSE(broken.passed);
    CHECK(broken.name == "so3.exp_log_roundtrip");

    const auto healthy = selftest::check_so3_roundtrip(2000, so3::kPi - 1e-3, 1e-9);
    CHECK(healthy.passed);
}

TEST_CASE("selftest gradient checks report at least 100 probes per variant") {
    const auto r = selftest::check_variant_gradients(models::Variant::MG, 120, 55);
    CHECK(r.passed);
    CHECK(r.detail.find("120 probes") != std::string::npos);
}

TEST_CASE("full selftest suite is green") {
    const auto results = selftest::run_all_checks();
    for (const auto& r : results) {
        INFO(r.name, ": ", r.detail);
        CHECK(r.passed);
    }
    CHECK(results.size() >= 23); // 10 property groups + 11 variants + 2 fixtures
}

TEST_SUITE_END();
