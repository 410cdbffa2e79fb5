#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bindelta/binning.hpp"
#include "bindelta/so3.hpp"

namespace bindelta::data {

/// One training/evaluation record: feature vector, ground-truth pose, and
/// (once a dictionary is attached) the cached bin label, residual targets
/// and soft assignment.
struct PoseSample {
    std::vector<double> features;
    AxisAngle pose; // canonical axis-angle ground truth
    int category = 0;

    // caches, valid for the dictionary they were prepared against
    std::size_t label = 0;
    AxisAngle delta_additive{};
    AxisAngle delta_riemannian{};
    std::vector<double> soft; // p* at the prepared gamma
    bool prepared = false;
};

enum class Provenance { synthetic, file };

struct Dataset {
    std::vector<PoseSample> samples;
    Provenance provenance = Provenance::synthetic;
    /// Category id when homogeneous, -1 for mixed-category files.
    int category = 0;
    std::size_t feature_dim = 0;

    std::size_t size() const { return samples.size(); }
    std::vector<AxisAngle> poses() const;
    std::vector<int> category_ids() const; // distinct ids, ascending
};

enum class PoseDistribution { uniform, mixture };

struct SynthConfig {
    std::size_t n_samples = 1000;
    std::size_t feature_dim = 64;
    double noise_std = 0.02;         // feature-space Gaussian noise
    unsigned symmetry_order = 1;     // s; orbit {R * Rz(2*pi/s)^j}
    PoseDistribution pose_dist = PoseDistribution::uniform;
    std::uint64_t seed = 0;
    // mixture distribution shape
    std::size_t mixture_modes = 8;
    double mixture_std = 0.25; // radians, tangent-space spread
    /// Probability that the true pose is the canonical orbit member
    /// (s > 1 only). 0.5 reproduces exact Haar sampling.
    double symmetry_bias = 0.5;
};

/// Features are a fixed seeded linear map of the canonical orbit member's
/// rotation entries plus Gaussian noise; the ground truth is the log of
/// the TRUE rotation, so for symmetry_order > 1 identical features carry
/// several distinct ground truths.
Dataset generate_synthetic(const SynthConfig& cfg);

/// All members {R * S^j} of a pose's symmetry orbit, S = Rz(2*pi/s).
std::vector<RotationMatrix> symmetry_orbit(const RotationMatrix& r, unsigned s);
/// Orbit member whose log is lexicographically smallest.
RotationMatrix canonical_orbit_member(const RotationMatrix& r, unsigned s);

/// CSV rows: category_id, y1, y2, y3, f1..fD. '#' starts a comment line.
/// Poses are canonicalized on load; malformed rows raise std::runtime_error
/// naming the row number.
Dataset load_csv(const std::filesystem::path& path, std::size_t feature_dim);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// Seeded shuffle then partition; the two parts are disjoint and exhaust
/// the input.
std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction,
                                  std::uint64_t seed);

/// Restrict to one category (preserving order).
Dataset filter_category(const Dataset& ds, int category);

/// Fill the per-sample label/delta/soft caches for `dict`.
void attach_dictionary(Dataset& ds, const binning::PoseDictionary& dict, double gamma);

} // namespace bindelta::data
