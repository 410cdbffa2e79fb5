#include "bindelta/binning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "bindelta/kernels.hpp"
#include "bindelta/rng.hpp"

namespace bindelta::binning {

namespace {

double sq_dist(const AxisAngle& a, const AxisAngle& b) {
    const Vec3 d = a - b;
    return dot(d, d);
}

std::size_t nearest(const AxisAngle& y, std::span<const AxisAngle> centers) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
        const double d = sq_dist(y, centers[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

std::vector<AxisAngle> kmeanspp_init(std::span<const AxisAngle> poses, std::size_t k, Rng& rng) {
    std::vector<AxisAngle> centers;
    centers.reserve(k);
    centers.push_back(poses[rng.uniform_index(poses.size())]);
    std::vector<double> d2(poses.size());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < poses.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, sq_dist(poses[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_index(poses.size());
        } else {
            double r = rng.uniform() * total;
            pick = poses.size() - 1;
            for (std::size_t i = 0; i < poses.size(); ++i) {
                r -= d2[i];
                if (r <= 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(poses[pick]);
    }
    return centers;
}

} // namespace

PoseDictionary kmeans_fit(std::span<const AxisAngle> poses, std::size_t k,
                          std::uint64_t seed, KmeansStats* stats) {
    if (k == 0) throw std::invalid_argument("kmeans_fit: K must be >= 1");
    if (poses.size() < k)
        throw std::invalid_argument("kmeans_fit: fewer poses than clusters");

    Rng rng(seed);
    std::vector<AxisAngle> centers = kmeanspp_init(poses, k, rng);
    std::vector<std::size_t> assign(poses.size(), 0);
    std::vector<std::size_t> counts(k, 0);
    if (stats) {
        stats->objective_per_iteration.clear();
        stats->iterations = 0;
    }

    constexpr std::size_t kMaxIters = 300;
    for (std::size_t iter = 0; iter < kMaxIters; ++iter) {
        bool changed = iter == 0;
        double objective = 0.0;
        for (std::size_t i = 0; i < poses.size(); ++i) {
            const std::size_t a = nearest(poses[i], centers);
            objective += sq_dist(poses[i], centers[a]);
            if (a != assign[i]) {
                assign[i] = a;
                changed = true;
            }
        }
        if (stats) {
            stats->objective_per_iteration.push_back(objective);
            stats->iterations = iter + 1;
        }
        if (!changed && iter > 0) break;

        std::vector<AxisAngle> sums(k, AxisAngle{0, 0, 0});
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < poses.size(); ++i) {
            sums[assign[i]] += poses[i];
            counts[assign[i]] += 1;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                centers[c] = sums[c] * (1.0 / double(counts[c]));
            } else {
                // re-seed with the point farthest from its centroid
                std::size_t far_i = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < poses.size(); ++i) {
                    const double d = sq_dist(poses[i], centers[assign[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far_i = i;
                    }
                }
                centers[c] = poses[far_i];
            }
        }
    }

    // final assignment pass for member counts
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < poses.size(); ++i) counts[nearest(poses[i], centers)] += 1;

    PoseDictionary dict;
    dict.key_poses = std::move(centers);
    dict.seed = seed;
    dict.member_counts = std::move(counts);
    return dict;
}

std::size_t assign_hard(const AxisAngle& y, const PoseDictionary& dict) {
    if (dict.size() == 0) throw std::invalid_argument("assign_hard: empty dictionary");
    return nearest(y, dict.key_poses);
}

SoftAssignment assign_soft(const AxisAngle& y, const PoseDictionary& dict, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("assign_soft: gamma must be positive");
    if (dict.size() == 0) throw std::invalid_argument("assign_soft: empty dictionary");
    std::vector<double> logits(dict.size());
    for (std::size_t k = 0; k < dict.size(); ++k)
        logits[k] = -gamma * sq_dist(y, dict.key_poses[k]);
    const double m = kernels::max_value(logits.data(), logits.size());
    double z = 0.0;
    for (double& v : logits) {
        v = std::exp(v - m);
        z += v;
    }
    SoftAssignment s;
    s.gamma = gamma;
    s.p.resize(dict.size());
    for (std::size_t k = 0; k < dict.size(); ++k) s.p[k] = logits[k] / z;
    return s;
}

AxisAngle delta_target(const AxisAngle& y, const PoseDictionary& dict,
                       std::size_t label, DeltaMode mode) {
    if (label >= dict.size()) throw std::invalid_argument("delta_target: label out of range");
    const AxisAngle& z = dict.key_poses[label];
    if (mode == DeltaMode::additive) return y - z;
    const Mat3 rel = so3::exp_map(z).m.transpose() * so3::exp_map(y).m;
    return so3::log_map(RotationMatrix{rel});
}

double default_gamma(const PoseDictionary& dict, std::span<const AxisAngle> poses) {
    if (poses.empty()) throw std::invalid_argument("default_gamma: empty pose list");
    double ss = 0.0;
    for (const auto& y : poses) ss += sq_dist(y, dict.key_poses[assign_hard(y, dict)]);
    const double sigma2 = ss / double(poses.size());
    if (sigma2 <= 0.0) return 1.0;
    return 1.0 / (2.0 * sigma2);
}

QuantizationFloor quantization_floor(const PoseDictionary& dict,
                                     std::span<const AxisAngle> poses) {
    if (poses.empty()) throw std::invalid_argument("quantization_floor: empty pose list");
    std::vector<double> errs;
    errs.reserve(poses.size());
    double total = 0.0;
    for (const auto& y : poses) {
        const std::size_t k = assign_hard(y, dict);
        const double e = so3::geodesic_distance(so3::exp_map(y), so3::exp_map(dict.key_poses[k]));
        errs.push_back(e);
        total += e;
    }
    std::sort(errs.begin(), errs.end());
    const double rad2deg = 180.0 / so3::kPi;
    QuantizationFloor f;
    f.median_deg = errs[(errs.size() - 1) / 2] * rad2deg; // lower-middle on even counts
    f.mean_deg = total / double(errs.size()) * rad2deg;
    return f;
}

void save_dictionary(const PoseDictionary& dict, const std::filesystem::path& path) {
    nlohmann::json j;
    j["K"] = dict.size();
    j["seed"] = dict.seed;
    auto poses = nlohmann::json::array();
    for (const auto& z : dict.key_poses) poses.push_back({z.x, z.y, z.z});
    j["key_poses"] = poses;
    if (!dict.member_counts.empty()) j["member_counts"] = dict.member_counts;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_dictionary: cannot open " + path.string());
    os << j.dump(2) << "\n";
}

PoseDictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_dictionary: cannot open " + path.string());
    nlohmann::json j;
    is >> j;
    PoseDictionary dict;
    dict.seed = j.value("seed", std::uint64_t{0});
    for (const auto& row : j.at("key_poses"))
        dict.key_poses.push_back(AxisAngle{row.at(0), row.at(1), row.at(2)});
    if (j.contains("member_counts"))
        dict.member_counts = j["member_counts"].get<std::vector<std::size_t>>();
    const std::size_t k = j.at("K").get<std::size_t>();
    if (k != dict.key_poses.size())
        throw std::runtime_error("load_dictionary: K does not match key_poses length");
    return dict;
}

} // namespace bindelta::binning
