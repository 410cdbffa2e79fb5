#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bindelta/so3.hpp"

namespace bindelta::binning {

/// Pose-space discretization: K key poses (K-means centroids over
/// axis-angle annotations) plus fit metadata.
struct PoseDictionary {
    std::vector<AxisAngle> key_poses;
    std::uint64_t seed = 0;
    std::vector<std::size_t> member_counts;

    std::size_t size() const { return key_poses.size(); }
};

struct KmeansStats {
    std::vector<double> objective_per_iteration; // sum of squared distances
    std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding on raw axis-angle 3-vectors
/// (Euclidean metric). Deterministic per seed; stops when assignments are
/// unchanged or after 300 iterations. Empty clusters are re-seeded with
/// the point farthest from its centroid.
PoseDictionary kmeans_fit(std::span<const AxisAngle> poses, std::size_t k,
                          std::uint64_t seed, KmeansStats* stats = nullptr);

/// argmin_k ||y - z_k||_2, ties broken by lowest index.
std::size_t assign_hard(const AxisAngle& y, const PoseDictionary& dict);

struct SoftAssignment {
    std::vector<double> p;
    double gamma = 1.0;
};

/// softmax over -gamma * squared Euclidean distances (max-subtracted).
SoftAssignment assign_soft(const AxisAngle& y, const PoseDictionary& dict, double gamma);

enum class DeltaMode { additive, riemannian };

/// Ground-truth residual for bin `label`: additive y - z, or the tangent
/// vector log(exp(z)^T exp(y)).
AxisAngle delta_target(const AxisAngle& y, const PoseDictionary& dict,
                       std::size_t label, DeltaMode mode);

/// Default soft-assignment sharpness: 1/(2 sigma^2) with sigma the RMS
/// distance of points to their assigned centroid.
double default_gamma(const PoseDictionary& dict, std::span<const AxisAngle> poses);

struct QuantizationFloor {
    double median_deg = 0.0;
    double mean_deg = 0.0;
};

/// Geodesic distance from each pose to its Euclidean-nearest key pose;
/// the irreducible error of predicting key poses only.
QuantizationFloor quantization_floor(const PoseDictionary& dict,
                                     std::span<const AxisAngle> poses);

/// JSON round trip: {"K":…, "seed":…, "key_poses":[[x,y,z],…]}.
void save_dictionary(const PoseDictionary& dict, const std::filesystem::path& path);
PoseDictionary load_dictionary(const std::filesystem::path& path);

} // namespace bindelta::binning
