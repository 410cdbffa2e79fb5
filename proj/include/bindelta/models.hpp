#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bindelta/binning.hpp"
#include "bindelta/data.hpp"
#include "bindelta/net.hpp"
#include "bindelta/so3.hpp"

namespace bindelta::models {

/// The model zoo: two regression baselines, the classification baseline,
/// and the four bin-and-delta loss families in single-delta and
/// one-delta-network-per-bin ("+") forms.
enum class Variant { RE, RG, C, MS, MG, MR, MP, MSp, MGp, MRp, MPp };

inline constexpr Variant kAllVariants[] = {
    Variant::RE, Variant::RG, Variant::C,   Variant::MS,  Variant::MG, Variant::MR,
    Variant::MP, Variant::MSp, Variant::MGp, Variant::MRp, Variant::MPp};

std::string_view variant_name(Variant v); // "R_E", "M_G+", ...
std::optional<Variant> parse_variant(std::string_view name);

bool has_bin_network(Variant v);   // everything except R_E, R_G
bool has_delta_network(Variant v); // bin-and-delta families only
bool per_bin_deltas(Variant v);    // "+" variants
bool is_regression_baseline(Variant v);

/// additive for the families written as z + delta, riemannian (group
/// product) for the tangent-space family.
binning::DeltaMode default_compose_mode(Variant v);
double default_alpha(Variant v);        // 1, except M_G+: 10 and M_R family: 0.1
std::size_t default_bin_count(Variant v); // 16 for "+" variants, else 100

enum class BinSelection { teacher_forced, predicted };

struct ModelConfig {
    Variant variant = Variant::MG;
    std::size_t k = 16;
    double alpha = 1.0;
    double gamma = 0.0; // <= 0: auto (1/(2 sigma^2) from the fitted dictionary)
    binning::DeltaMode compose_mode = binning::DeltaMode::additive;
    BinSelection bin_selection = BinSelection::teacher_forced;
    bool clip_gradients = false; // on by default for the M_G / M_P families
    double clip_norm = 10.0;
    std::size_t feature_dim = 64;
    std::vector<std::size_t> bin_hidden{64, 32};
    std::vector<std::size_t> delta_hidden{64, 32};
    std::vector<std::size_t> regressor_hidden{64, 32};
};

ModelConfig default_config(Variant v, std::size_t feature_dim);

struct ModelParams {
    ModelConfig cfg;
    binning::PoseDictionary dict;             // empty for regression baselines
    std::optional<net::MlpParams> bin;        // classifier head, output dim K
    std::optional<net::MlpParams> regressor;  // R_E / R_G head, output dim 3
    std::vector<net::MlpParams> deltas;       // 0, 1 or K networks, output dim 3
};

/// Seeded parameter initialization. The dictionary is required for every
/// variant except R_E/R_G and must have cfg.k entries.
ModelParams initialize(const ModelConfig& cfg, const binning::PoseDictionary& dict,
                       std::uint64_t seed);

/// Composition g(z, delta): additive (canonicalized sum) or the group
/// product log(exp(z) exp(delta)).
AxisAngle compose(const AxisAngle& z, const AxisAngle& delta, binning::DeltaMode mode);

enum class RegressionMetric { euclidean, geodesic };

struct RegressionLoss {
    double loss = 0.0;
    Vec3 grad{}; // d loss / d y_pred
    bool degenerate = false;
};

/// Squared Euclidean or geodesic pose loss with analytic gradient. The
/// geodesic gradient is J_r(y)^T times the relative-rotation axis; at the
/// singular relative angles 0 and pi the loss is returned with a zero
/// gradient and the degenerate flag set.
RegressionLoss loss_regression(const AxisAngle& y_pred, const AxisAngle& y_star,
                               RegressionMetric metric);

/// Geodesic loss of the composed pose g(z, delta) with gradient wrt delta.
RegressionLoss geodesic_compose_loss(const AxisAngle& y_star, const AxisAngle& z,
                                     const AxisAngle& delta, binning::DeltaMode mode);

/// Raw head outputs for one sample. `deltas` has one entry for
/// single-delta variants and K entries for "+" variants (entries that a
/// loss does not touch are ignored).
struct HeadOutputs {
    std::vector<double> logits;
    std::vector<Vec3> deltas;
    Vec3 regression{};
};

struct HeadLoss {
    double loss = 0.0;
    std::vector<double> dlogits;
    std::vector<Vec3> ddeltas;
    Vec3 dregression{};
    int degenerate_count = 0;
};

net::ScalarLoss loss_classification(std::span<const double> logits, std::size_t label);

// Eq-level objectives. The bin used to select key pose / delta head is the
// ground-truth label under teacher forcing, otherwise argmax of the logits.
HeadLoss loss_simple_bd(const data::PoseSample& s, const HeadOutputs& out,
                        const ModelConfig& cfg, const binning::PoseDictionary& dict);
HeadLoss loss_geodesic_bd(const data::PoseSample& s, const HeadOutputs& out,
                          const ModelConfig& cfg, const binning::PoseDictionary& dict);
HeadLoss loss_riemannian_bd(const data::PoseSample& s, const HeadOutputs& out,
                            const ModelConfig& cfg, const binning::PoseDictionary& dict);
HeadLoss loss_probabilistic_bd(const data::PoseSample& s, const HeadOutputs& out,
                               const ModelConfig& cfg, const binning::PoseDictionary& dict);

/// Dispatch on cfg.variant (baselines included); sample caches must be
/// prepared for bin-and-delta variants.
HeadLoss sample_loss(const data::PoseSample& s, const HeadOutputs& out,
                     const ModelConfig& cfg, const binning::PoseDictionary& dict);

AxisAngle predict_pose(const ModelParams& params, std::span<const double> features);

/// Full per-sample loss and exact parameter gradients (forwards, head
/// loss, backprop). Used by the trainer and the gradient-check harness.
struct ModelGrads {
    std::optional<net::MlpGrads> bin;
    std::optional<net::MlpGrads> regressor;
    std::vector<net::MlpGrads> deltas;

    void zero_all();
};

ModelGrads make_model_grads(const ModelParams& p);
/// Accumulates into `grads`; returns the sample loss. `variant_override`
/// substitutes the objective (warm-start epochs) without touching the
/// architecture.
double accumulate_sample_gradients(const ModelParams& p, const data::PoseSample& s,
                                   ModelGrads& grads, int* degenerate_count = nullptr,
                                   std::optional<Variant> variant_override = std::nullopt);

// Flat view over every trainable parameter (bin, regressor, deltas in
// order), for checkpoint-free probing.
std::size_t flat_parameter_count(const ModelParams& p);
double get_flat_parameter(const ModelParams& p, std::size_t i);
void set_flat_parameter(ModelParams& p, std::size_t i, double v);
std::vector<double> flatten_gradients(const ModelParams& p, const ModelGrads& g);

/// Loss value only (no gradients); same evaluation path as the trainer.
double sample_loss_value(const ModelParams& p, const data::PoseSample& s,
                         std::optional<Variant> variant_override = std::nullopt);

/// ReLU gate pattern of all networks evaluated on `s` (gradient-check
/// smoothness guard). Includes the degenerate flags of the geodesic terms.
std::uint64_t model_signature(const ModelParams& p, const data::PoseSample& s,
                              std::optional<Variant> variant_override = std::nullopt);

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double lr_decay = 0.9;
    std::uint64_t seed = 0;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mederr_deg = 0.0;
    double val_acc_pi6 = 0.0;
    std::size_t degenerate_count = 0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> history;
    bool diverged = false;
    std::string divergence_detail;
    double effective_gamma = 0.0;
};

/// Minibatch Adam training of one category's model. Fits the dictionary
/// on the training split (unless one is supplied), prepares sample
/// caches, and runs the variant's objective; the M_G family spends its
/// first epoch on the corresponding simple objective as a warm start.
/// On divergence the parameters revert to the end of the last completed
/// epoch. Deterministic per seed.
TrainResult train(const ModelConfig& cfg, const data::Dataset& train_split,
                  const data::Dataset& val_split, const TrainConfig& tcfg,
                  const binning::PoseDictionary* dict = nullptr);

} // namespace bindelta::models
