#include "bindelta/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "bindelta/kernels.hpp"

namespace bindelta::net {

namespace {

void check_sizes(std::span<const std::size_t> sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("mlp: need at least input and output sizes");
    for (std::size_t s : sizes)
        if (s == 0) throw std::invalid_argument("mlp: zero layer size");
}

} // namespace

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

double MlpParams::get_flat(std::size_t i) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (i < weights[l].size()) return weights[l][i];
        i -= weights[l].size();
        if (i < biases[l].size()) return biases[l][i];
        i -= biases[l].size();
    }
    throw std::out_of_range("MlpParams::get_flat");
}

void MlpParams::set_flat(std::size_t i, double v) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (i < weights[l].size()) {
            weights[l][i] = v;
            return;
        }
        i -= weights[l].size();
        if (i < biases[l].size()) {
            biases[l][i] = v;
            return;
        }
        i -= biases[l].size();
    }
    throw std::out_of_range("MlpParams::set_flat");
}

double MlpGrads::get_flat(std::size_t i) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (i < weights[l].size()) return weights[l][i];
        i -= weights[l].size();
        if (i < biases[l].size()) return biases[l][i];
        i -= biases[l].size();
    }
    throw std::out_of_range("MlpGrads::get_flat");
}

MlpParams make_mlp(std::span<const std::size_t> sizes, Rng& rng) {
    check_sizes(sizes);
    MlpParams p;
    p.sizes.assign(sizes.begin(), sizes.end());
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t fan_in = sizes[l], fan_out = sizes[l + 1];
        const double limit = std::sqrt(6.0 / double(fan_in));
        std::vector<double> w(fan_out * fan_in);
        for (double& x : w) x = rng.uniform(-limit, limit);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

MlpParams make_zero_mlp(std::span<const std::size_t> sizes) {
    check_sizes(sizes);
    MlpParams p;
    p.sizes.assign(sizes.begin(), sizes.end());
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        p.weights.emplace_back(sizes[l + 1] * sizes[l], 0.0);
        p.biases.emplace_back(sizes[l + 1], 0.0);
    }
    return p;
}

MlpGrads make_grads(const MlpParams& p) {
    MlpGrads g;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        g.weights.emplace_back(p.weights[l].size(), 0.0);
        g.biases.emplace_back(p.biases[l].size(), 0.0);
    }
    return g;
}

void MlpGrads::zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

std::uint64_t GradTape::activation_signature() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& pre : pre_acts)
        for (double v : pre) {
            h ^= (v > 0.0) ? 0x9eULL : 0x3cULL;
            h *= 0x100000001b3ULL;
        }
    return h;
}

std::vector<double> forward(const MlpParams& p, std::span<const double> input, GradTape* tape) {
    if (input.size() != p.input_dim())
        throw std::invalid_argument("forward: feature dimension mismatch");
    std::vector<double> cur(input.begin(), input.end());
    if (tape) {
        tape->layer_inputs.clear();
        tape->pre_acts.clear();
        tape->consumed = false;
    }
    const std::size_t L = p.layer_count();
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t rows = p.sizes[l + 1], cols = p.sizes[l];
        if (tape) tape->layer_inputs.push_back(cur);
        std::vector<double> out(rows);
        kernels::gemv(p.weights[l].data(), cur.data(), p.biases[l].data(), out.data(), rows, cols);
        if (l + 1 < L) {
            if (tape) tape->pre_acts.push_back(out);
            kernels::relu(out.data(), out.data(), rows);
        }
        cur = std::move(out);
    }
    return cur;
}

std::vector<double> backward(const MlpParams& p, GradTape& tape,
                             std::span<const double> upstream, MlpGrads& grads) {
    if (tape.consumed) throw std::logic_error("backward: tape already consumed");
    if (upstream.size() != p.output_dim())
        throw std::invalid_argument("backward: upstream dimension mismatch");
    if (tape.layer_inputs.size() != p.layer_count())
        throw std::invalid_argument("backward: tape does not match network");
    tape.consumed = true;

    std::vector<double> delta(upstream.begin(), upstream.end());
    for (std::size_t li = p.layer_count(); li-- > 0;) {
        const std::size_t rows = p.sizes[li + 1], cols = p.sizes[li];
        if (li + 1 < p.layer_count()) {
            // gate the incoming gradient through the ReLU of this layer's output
            kernels::relu_backward(tape.pre_acts[li].data(), delta.data(), delta.data(), rows);
        }
        kernels::ger_acc(delta.data(), tape.layer_inputs[li].data(),
                         grads.weights[li].data(), rows, cols);
        kernels::axpy(1.0, delta.data(), grads.biases[li].data(), rows);
        std::vector<double> dx(cols, 0.0);
        kernels::gemv_t_acc(p.weights[li].data(), delta.data(), dx.data(), rows, cols);
        delta = std::move(dx);
    }
    return delta;
}

std::vector<double> log_softmax(std::span<const double> logits) {
    const double m = kernels::max_value(logits.data(), logits.size());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    const double lz = m + std::log(z);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out = log_softmax(logits);
    for (double& v : out) v = std::exp(v);
    return out;
}

ScalarLoss softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size())
        throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const std::vector<double> ls = log_softmax(logits);
    ScalarLoss r;
    r.loss = -ls[label];
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(ls[i]);
    r.grad[label] -= 1.0;
    return r;
}

ScalarLoss kl_divergence(std::span<const double> p_star, std::span<const double> logits) {
    if (p_star.size() != logits.size())
        throw std::invalid_argument("kl_divergence: dimension mismatch");
    const std::vector<double> ls = log_softmax(logits);
    ScalarLoss r;
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (p_star[i] > 0.0) r.loss += p_star[i] * (std::log(p_star[i]) - ls[i]);
        r.grad[i] = std::exp(ls[i]) - p_star[i];
    }
    return r;
}

double AdamState::learning_rate() const {
    return cfg.base_lr * std::pow(cfg.lr_decay, double(epoch));
}

AdamState make_adam(const MlpParams& p, const AdamConfig& cfg) {
    AdamState s;
    s.cfg = cfg;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        s.m.emplace_back(p.weights[l].size() + p.biases[l].size(), 0.0);
        s.v.emplace_back(p.weights[l].size() + p.biases[l].size(), 0.0);
    }
    return s;
}

void adam_step(MlpParams& p, const MlpGrads& g, AdamState& s) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        for (double x : g.weights[l])
            if (!std::isfinite(x))
                throw TrainingDivergenceError("non-finite gradient in layer " +
                                              std::to_string(l) + " weights");
        for (double x : g.biases[l])
            if (!std::isfinite(x))
                throw TrainingDivergenceError("non-finite gradient in layer " +
                                              std::to_string(l) + " biases");
    }
    s.step += 1;
    const double lr = s.learning_rate();
    const double bc1 = 1.0 - std::pow(s.cfg.beta1, double(s.step));
    const double bc2 = 1.0 - std::pow(s.cfg.beta2, double(s.step));
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const std::size_t nw = p.weights[l].size();
        const std::size_t nb = p.biases[l].size();
        kernels::adam_update(p.weights[l].data(), s.m[l].data(), s.v[l].data(),
                             g.weights[l].data(), nw, lr, s.cfg.beta1, s.cfg.beta2,
                             s.cfg.eps, bc1, bc2);
        kernels::adam_update(p.biases[l].data(), s.m[l].data() + nw, s.v[l].data() + nw,
                             g.biases[l].data(), nb, lr, s.cfg.beta1, s.cfg.beta2,
                             s.cfg.eps, bc1, bc2);
    }
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<double(std::size_t)>& get,
                           const std::function<void(std::size_t, double)>& set,
                           std::span<const double> analytic, std::size_t dim,
                           int probes, double step, Rng& rng,
                           const std::function<std::uint64_t()>& signature) {
    GradCheckReport rep;
    const int max_attempts = probes * 20;
    int attempts = 0;
    while (rep.probes_checked < probes && attempts < max_attempts) {
        ++attempts;
        const std::size_t i = std::size_t(rng.uniform_index(dim));
        const double x0 = get(i);
        const double h = step * std::max(1.0, std::abs(x0));

        set(i, x0 + h);
        const double lp = loss();
        const std::uint64_t sig_p = signature ? signature() : 0;
        set(i, x0 - h);
        const double lm = loss();
        const std::uint64_t sig_m = signature ? signature() : 0;
        set(i, x0);

        if (signature && sig_p != sig_m) {
            // Crossed a non-smooth boundary (ReLU gate flip); the central
            // difference is meaningless there.
            ++rep.probes_skipped;
            continue;
        }
        const double fd = (lp - lm) / (2.0 * h);
        const double a = analytic[i];
        // The 1e-3 floor keeps central-difference roundoff (~|loss|*eps/h)
        // from registering as relative error on near-zero gradients.
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
        if (rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst_index = i;
        }
        ++rep.probes_checked;
    }
    return rep;
}

namespace {

constexpr char kMagic[8] = {'B', 'D', 'L', 'N', 'E', 'T', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& os, double d) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (u >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

} // namespace

void save_checkpoint(const MlpParams& p, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    os.write(kMagic, 8);
    write_u32(os, 1); // format version
    write_u32(os, std::uint32_t(p.sizes.size()));
    for (std::size_t s : p.sizes) write_u32(os, std::uint32_t(s));
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        for (double v : p.weights[l]) write_f64(os, v);
        for (double v : p.biases[l]) write_f64(os, v);
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    const std::uint32_t version = read_u32(is);
    if (version != 1) throw std::runtime_error("load_checkpoint: unsupported version");
    const std::uint32_t n_sizes = read_u32(is);
    if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("load_checkpoint: bad header");
    std::vector<std::size_t> sizes(n_sizes);
    for (auto& s : sizes) s = read_u32(is);
    MlpParams p = make_zero_mlp(sizes);
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        for (double& v : p.weights[l]) v = read_f64(is);
        for (double& v : p.biases[l]) v = read_f64(is);
    }
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        for (double v : p.weights[l])
            if (!std::isfinite(v))
                throw std::runtime_error("load_checkpoint: non-finite parameter in " +
                                         path.string());
        for (double v : p.biases[l])
            if (!std::isfinite(v))
                throw std::runtime_error("load_checkpoint: non-finite parameter in " +
                                         path.string());
    }
    return p;
}

} // namespace bindelta::net
