#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bindelta/rng.hpp"

namespace bindelta::net {

/// Fully connected stack: affine + ReLU between hidden layers, linear
/// output. sizes = {input, hidden..., output}. Weights are row-major
/// (out x in).
struct MlpParams {
    std::vector<std::size_t> sizes;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    std::size_t input_dim() const { return sizes.front(); }
    std::size_t output_dim() const { return sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }
    std::size_t parameter_count() const;

    // Flat-index access across all weights then biases, layer by layer
    // (weights[0], biases[0], weights[1], ...). Used by checkpointing and
    // the gradient checker.
    double get_flat(std::size_t i) const;
    void set_flat(std::size_t i, double v);
};

/// He-uniform initialization, biases zero.
MlpParams make_mlp(std::span<const std::size_t> sizes, Rng& rng);
MlpParams make_zero_mlp(std::span<const std::size_t> sizes);

/// Activations cached by one forward pass; feeds exactly one backward call.
struct GradTape {
    std::vector<std::vector<double>> layer_inputs; // input to each affine layer
    std::vector<std::vector<double>> pre_acts;     // pre-ReLU values, hidden layers only
    bool consumed = false;

    /// Bit pattern of the ReLU gates; two points with equal signatures lie
    /// on the same smooth piece of the network.
    std::uint64_t activation_signature() const;
};

/// Gradients with the same shapes as MlpParams.
struct MlpGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void zero();
    double get_flat(std::size_t i) const;
};

MlpGrads make_grads(const MlpParams& p);

std::vector<double> forward(const MlpParams& p, std::span<const double> input,
                            GradTape* tape = nullptr);

/// Exact reverse-mode gradients of the forward pass recorded on `tape`.
/// Accumulates into `grads` and returns the input gradient. The tape is
/// consumed; a second call on the same tape throws std::logic_error.
std::vector<double> backward(const MlpParams& p, GradTape& tape,
                             std::span<const double> upstream, MlpGrads& grads);

struct ScalarLoss {
    double loss = 0.0;
    std::vector<double> grad; // d loss / d logits
};

/// Numerically stable cross entropy: -log softmax(logits)[label].
ScalarLoss softmax_cross_entropy(std::span<const double> logits, std::size_t label);

/// KL(p* || softmax(logits)) with 0 log 0 = 0; gradient softmax - p*.
ScalarLoss kl_divergence(std::span<const double> p_star, std::span<const double> logits);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

struct AdamConfig {
    double base_lr = 1e-4;   // Adam starting rate
    double lr_decay = 0.1;   // multiplicative per-epoch decay
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<std::vector<double>> m; // first moments, parameter shapes
    std::vector<std::vector<double>> v; // second moments
    std::uint64_t step = 0;
    std::uint64_t epoch = 0;

    double learning_rate() const;
};

AdamState make_adam(const MlpParams& p, const AdamConfig& cfg);

/// One Adam step. Throws TrainingDivergenceError when a gradient entry is
/// non-finite, naming the offending layer.
void adam_step(MlpParams& p, const MlpGrads& g, AdamState& s);

class TrainingDivergenceError : public std::runtime_error {
public:
    explicit TrainingDivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Finite-difference gradient checking harness.
///
/// loss() evaluates the scalar objective at the current parameters;
/// get/set address a flat parameter vector of size `dim`; analytic holds
/// the gradient to verify. `signature`, when provided, identifies the
/// smooth piece the evaluation landed on (e.g. the ReLU gate pattern):
/// probes whose +/- h evaluations disagree are skipped and resampled,
/// since the objective is not differentiable across such a boundary.
struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    int probes_checked = 0;
    int probes_skipped = 0;
};

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<double(std::size_t)>& get,
                           const std::function<void(std::size_t, double)>& set,
                           std::span<const double> analytic, std::size_t dim,
                           int probes, double step, Rng& rng,
                           const std::function<std::uint64_t()>& signature = {});

/// Flat binary checkpoint: magic, version, layer sizes, then little-endian
/// IEEE-754 doubles in layer order (W then b per layer). Exact roundtrip.
void save_checkpoint(const MlpParams& p, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

} // namespace bindelta::net
