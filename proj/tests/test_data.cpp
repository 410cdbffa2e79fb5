#include <doctest.h>
#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "bindelta/data.hpp"
#include "bindelta/eval.hpp"
#include "oracles.hpp"

using namespace bindelta;

TEST_SUITE_BEGIN("data");

namespace {

std::filesystem::path temp_csv(const char* name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream os(path);
    os << content;
    return path;
}

} // namespace

TEST_CASE("synthetic generation is deterministic per seed") {
    data::SynthConfig cfg;
    cfg.n_samples = 64;
    cfg.seed = 9;
    const auto a = data::generate_synthetic(cfg);
    const auto b = data::generate_synthetic(cfg);
    cfg.seed = 10;
    const auto c = data::generate_synthetic(cfg);
    REQUIRE(a.size() == b.size());
    bool identical = true, differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        identical = identical && a.samples[i].features == b.samples[i].features &&
                    oracles::max_abs_diff(a.samples[i].pose, b.samples[i].pose) == 0.0;
        differs = differs || a.samples[i].features != c.samples[i].features;
    }
    CHECK(identical);
    CHECK(differs);
}

TEST_CASE("synthetic config validation") {
    data::SynthConfig cfg;
    cfg.n_samples = 0;
    CHECK_THROWS_AS(data::generate_synthetic(cfg), std::invalid_argument);
    cfg.n_samples = 1;
    cfg.feature_dim = 8;
    CHECK_THROWS_AS(data::generate_synthetic(cfg), std::invalid_argument);
    cfg.feature_dim = 16;
    cfg.noise_std = -0.1;
    CHECK_THROWS_AS(data::generate_synthetic(cfg), std::invalid_argument);
    cfg.noise_std = 0.0;
    cfg.symmetry_bias = 1.5;
    CHECK_THROWS_AS(data::generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("noise-free unimodal features identify the pose (1-NN oracle)") {
    data::SynthConfig cfg;
    cfg.n_samples = 1500;
    cfg.noise_std = 0.0;
    cfg.seed = 31;
    const auto ds = data::generate_synthetic(cfg);
    auto [train, val] = data::split(ds, 0.2, 5);

    std::vector<double> errs;
    for (const auto& q : val.samples) {
        double best = 1e300;
        const data::PoseSample* hit = nullptr;
        for (const auto& t : train.samples) {
            double d = 0.0;
            for (std::size_t i = 0; i < q.features.size(); ++i) {
                const double diff = q.features[i] - t.features[i];
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                hit = &t;
            }
        }
        errs.push_back(eval::angle_error(hit->pose, q.pose));
    }
    std::sort(errs.begin(), errs.end());
    const double med_deg = errs[(errs.size() - 1) / 2] * 180.0 / so3::kPi;
    INFO("1-NN median error ", med_deg, " deg");
    CHECK(med_deg < 25.0); // density-limited, shrinks with n_samples
    CHECK(med_deg > 0.0);
}

TEST_CASE("symmetry orbits: member count and inter-mode distance") {
    Rng rng(33);
    for (int i = 0; i < 50; ++i) {
        const RotationMatrix r = so3::sample_uniform_rotation(rng);
        const auto orbit = data::symmetry_orbit(r, 2);
        REQUIRE(orbit.size() == 2);
        // the two orbit members of a half-turn symmetry are pi apart
        CHECK(std::abs(so3::geodesic_distance(orbit[0], orbit[1]) - so3::kPi) < 1e-7);
        // s = 4: adjacent members pi/2 apart
        const auto o4 = data::symmetry_orbit(r, 4);
        REQUIRE(o4.size() == 4);
        CHECK(std::abs(so3::geodesic_distance(o4[0], o4[1]) - so3::kPi / 2) < 1e-7);
    }
}

TEST_CASE("symmetric dataset: features depend on the canonical member only") {
    data::SynthConfig cfg;
    cfg.n_samples = 300;
    cfg.noise_std = 0.0;
    cfg.symmetry_order = 2;
    cfg.seed = 17;
    const auto ds = data::generate_synthetic(cfg);

    // regenerate with bias 1.0 (truth forced to the canonical member):
    // the feature map must be unchanged sample by sample
    data::SynthConfig canon_cfg = cfg;
    canon_cfg.symmetry_bias = 1.0;
    const auto canon = data::generate_synthetic(canon_cfg);
    REQUIRE(canon.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(ds.samples[i].features == canon.samples[i].features);

    // with bias 1.0 each pose is the canonical member of its own orbit
    for (const auto& s : canon.samples) {
        const RotationMatrix r = so3::exp_map(s.pose);
        const RotationMatrix c = data::canonical_orbit_member(r, 2);
        CHECK(oracles::max_abs_diff(r.m, c.m) < 1e-9);
    }
}

TEST_CASE("symmetry_bias controls the canonical-branch fraction") {
    data::SynthConfig cfg;
    cfg.n_samples = 10000;
    cfg.symmetry_order = 2;
    cfg.symmetry_bias = 0.65;
    cfg.seed = 77;
    const auto ds = data::generate_synthetic(cfg);
    std::size_t canonical = 0;
    for (const auto& s : ds.samples) {
        const RotationMatrix r = so3::exp_map(s.pose);
        const RotationMatrix c = data::canonical_orbit_member(r, 2);
        if (oracles::max_abs_diff(r.m, c.m) < 1e-9) ++canonical;
    }
    const double frac = double(canonical) / double(ds.size());
    INFO("canonical fraction ", frac);
    CHECK(frac == doctest::Approx(0.65).epsilon(0.03));
}

TEST_CASE("csv: empty file, single row, comments") {
    const auto empty = temp_csv("bindelta_empty.csv", "# nothing here\n\n");
    CHECK(data::load_csv(empty, 9).size() == 0);

    const auto one = temp_csv("bindelta_one.csv",
                              "# comment\n3,0,0,0,1,2,3,4,5,6,7,8,9\n");
    const auto ds = data::load_csv(one, 9);
    REQUIRE(ds.size() == 1);
    CHECK(ds.samples[0].category == 3);
    CHECK(norm(ds.samples[0].pose) == 0.0);
    CHECK(ds.samples[0].features == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(ds.category == 3);
    std::filesystem::remove(empty);
    std::filesystem::remove(one);
}

TEST_CASE("csv roundtrip reproduces poses and features bit-exactly") {
    data::SynthConfig cfg;
    cfg.n_samples = 120;
    cfg.feature_dim = 16;
    cfg.seed = 55;
    const auto ds = data::generate_synthetic(cfg);
    const auto path = std::filesystem::temp_directory_path() / "bindelta_roundtrip.csv";
    data::save_csv(ds, path);
    const auto back = data::load_csv(path, 16);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(oracles::max_abs_diff(back.samples[i].pose, ds.samples[i].pose) == 0.0);
        CHECK(back.samples[i].features == ds.samples[i].features);
        CHECK(back.samples[i].category == ds.samples[i].category);
    }
    CHECK(back.provenance == data::Provenance::file);
    std::filesystem::remove(path);
}

TEST_CASE("csv loader rejects malformed rows with the row number") {
    const auto ragged = temp_csv("bindelta_ragged.csv", "0,0,0,0,1,2\n0,0,0,0,1\n");
    CHECK_THROWS_WITH_AS(data::load_csv(ragged, 2),
                         doctest::Contains("row 2"), std::runtime_error);
    std::filesystem::remove(ragged);

    const auto nonfinite = temp_csv("bindelta_nan.csv", "0,0,0,0,nan,2\n");
    CHECK_THROWS_WITH_AS(data::load_csv(nonfinite, 2),
                         doctest::Contains("row 1"), std::runtime_error);
    std::filesystem::remove(nonfinite);

    const auto big = temp_csv("bindelta_bigpose.csv", "0,3.2,0,0,1,2\n");
    CHECK_THROWS_WITH_AS(data::load_csv(big, 2),
                         doctest::Contains("pose norm"), std::runtime_error);
    std::filesystem::remove(big);

    const auto garbage = temp_csv("bindelta_garbage.csv", "0,0,0,0,1,2x\n");
    CHECK_THROWS_AS(data::load_csv(garbage, 2), std::runtime_error);
    std::filesystem::remove(garbage);
}

TEST_CASE("split: sizes, disjoint-exhaustive union, determinism") {
    data::SynthConfig cfg;
    cfg.n_samples = 10;
    cfg.seed = 3;
    const auto ds = data::generate_synthetic(cfg);
    auto [train, val] = data::split(ds, 0.5, 42);
    CHECK(train.size() == 5);
    CHECK(val.size() == 5);

    // union preserves the multiset of poses
    std::multimap<double, int> original, recombined;
    for (const auto& s : ds.samples) original.emplace(s.pose.x, 0);
    for (const auto& s : train.samples) recombined.emplace(s.pose.x, 0);
    for (const auto& s : val.samples) recombined.emplace(s.pose.x, 0);
    CHECK(original.size() == recombined.size());
    auto it1 = original.begin();
    auto it2 = recombined.begin();
    for (; it1 != original.end(); ++it1, ++it2) CHECK(it1->first == it2->first);

    auto [train2, val2] = data::split(ds, 0.5, 42);
    for (std::size_t i = 0; i < train.size(); ++i)
        CHECK(train.samples[i].features == train2.samples[i].features);

    CHECK_THROWS_AS(data::split(ds, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(data::split(ds, 1.0, 1), std::invalid_argument);
}

TEST_CASE("attach_dictionary fills caches consistently") {
    data::SynthConfig cfg;
    cfg.n_samples = 200;
    cfg.seed = 21;
    auto ds = data::generate_synthetic(cfg);
    const auto dict = binning::kmeans_fit(ds.poses(), 8, 4);
    data::attach_dictionary(ds, dict, 2.0);
    for (const auto& s : ds.samples) {
        REQUIRE(s.prepared);
        CHECK(s.label == binning::assign_hard(s.pose, dict));
        CHECK(oracles::max_abs_diff(
                  s.delta_additive,
                  binning::delta_target(s.pose, dict, s.label, binning::DeltaMode::additive)) ==
              0.0);
        CHECK(oracles::max_abs_diff(s.delta_riemannian,
                                    binning::delta_target(s.pose, dict, s.label,
                                                          binning::DeltaMode::riemannian)) ==
              0.0);
        double total = 0.0;
        for (double p : s.soft) total += p;
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("mixture pose distribution concentrates near its modes") {
    data::SynthConfig cfg;
    cfg.n_samples = 2000;
    cfg.pose_dist = data::PoseDistribution::mixture;
    cfg.mixture_modes = 4;
    cfg.mixture_std = 0.1;
    cfg.seed = 66;
    const auto ds = data::generate_synthetic(cfg);
    // nearly all samples sit within a few mixture sigmas of some mode:
    // recover candidate modes by k-means and measure the floor
    const auto dict = binning::kmeans_fit(ds.poses(), 4, 2);
    const auto floor = binning::quantization_floor(dict, ds.poses());
    INFO("mixture floor ", floor.median_deg);
    CHECK(floor.median_deg < 3.0 * 0.1 * 180.0 / so3::kPi * 2.0);
}

TEST_SUITE_END();
