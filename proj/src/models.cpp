#include "bindelta/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bindelta/eval.hpp"
#include "bindelta/kernels.hpp"

namespace bindelta::models {

std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::RE: return "R_E";
        case Variant::RG: return "R_G";
        case Variant::C: return "C";
        case Variant::MS: return "M_S";
        case Variant::MG: return "M_G";
        case Variant::MR: return "M_R";
        case Variant::MP: return "M_P";
        case Variant::MSp: return "M_S+";
        case Variant::MGp: return "M_G+";
        case Variant::MRp: return "M_R+";
        case Variant::MPp: return "M_P+";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
    for (Variant v : kAllVariants)
        if (variant_name(v) == name) return v;
    return std::nullopt;
}

bool has_bin_network(Variant v) { return v != Variant::RE && v != Variant::RG; }

bool has_delta_network(Variant v) {
    return has_bin_network(v) && v != Variant::C;
}

bool per_bin_deltas(Variant v) {
    return v == Variant::MSp || v == Variant::MGp || v == Variant::MRp || v == Variant::MPp;
}

bool is_regression_baseline(Variant v) { return v == Variant::RE || v == Variant::RG; }

binning::DeltaMode default_compose_mode(Variant v) {
    return (v == Variant::MR || v == Variant::MRp) ? binning::DeltaMode::riemannian
                                                   : binning::DeltaMode::additive;
}

double default_alpha(Variant v) {
    if (v == Variant::MGp) return 10.0;
    if (v == Variant::MR || v == Variant::MRp) return 0.1;
    return 1.0;
}

std::size_t default_bin_count(Variant v) { return per_bin_deltas(v) ? 16 : 100; }

ModelConfig default_config(Variant v, std::size_t feature_dim) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.feature_dim = feature_dim;
    cfg.k = default_bin_count(v);
    cfg.alpha = default_alpha(v);
    cfg.compose_mode = default_compose_mode(v);
    cfg.clip_gradients = v == Variant::MG || v == Variant::MGp || v == Variant::MP ||
                         v == Variant::MPp;
    if (per_bin_deltas(v)) cfg.delta_hidden = {32};
    return cfg;
}

ModelParams initialize(const ModelConfig& cfg, const binning::PoseDictionary& dict,
                       std::uint64_t seed) {
    if (has_bin_network(cfg.variant)) {
        if (dict.size() == 0) throw std::invalid_argument("initialize: dictionary required");
        if (dict.size() != cfg.k)
            throw std::invalid_argument("initialize: dictionary size does not match cfg.k");
    }
    ModelParams p;
    p.cfg = cfg;
    const Rng root(seed);
    if (has_bin_network(cfg.variant)) {
        p.dict = dict;
        std::vector<std::size_t> sizes{cfg.feature_dim};
        sizes.insert(sizes.end(), cfg.bin_hidden.begin(), cfg.bin_hidden.end());
        sizes.push_back(cfg.k);
        Rng r = root.fork("init-bin");
        p.bin = net::make_mlp(sizes, r);
    } else {
        std::vector<std::size_t> sizes{cfg.feature_dim};
        sizes.insert(sizes.end(), cfg.regressor_hidden.begin(), cfg.regressor_hidden.end());
        sizes.push_back(3);
        Rng r = root.fork("init-regressor");
        p.regressor = net::make_mlp(sizes, r);
    }
    if (has_delta_network(cfg.variant)) {
        const std::size_t n_heads = per_bin_deltas(cfg.variant) ? cfg.k : 1;
        std::vector<std::size_t> sizes{cfg.feature_dim};
        sizes.insert(sizes.end(), cfg.delta_hidden.begin(), cfg.delta_hidden.end());
        sizes.push_back(3);
        for (std::size_t i = 0; i < n_heads; ++i) {
            Rng r = root.fork("init-delta-" + std::to_string(i));
            p.deltas.push_back(net::make_mlp(sizes, r));
        }
    }
    return p;
}

AxisAngle compose(const AxisAngle& z, const AxisAngle& delta, binning::DeltaMode mode) {
    if (!is_finite(z) || !is_finite(delta))
        throw std::invalid_argument("compose: non-finite input");
    if (mode == binning::DeltaMode::additive) return so3::canonicalize(z + delta);
    const Mat3 r = so3::exp_map(z).m * so3::exp_map(delta).m;
    return so3::log_map(RotationMatrix{r});
}

namespace {

constexpr double kDegenerateAxisNorm = 2e-7; // 2 sin(theta) at theta ~ 1e-7

double clamp_unit(double c) { return std::clamp(c, -1.0, 1.0); }

// Geodesic angle of A = R*^T base exp(local) and its gradient wrt `local`.
// The gradient is J_r(local)^T a / ||a|| with a the antisymmetric part of
// A; ||a|| = 2 sin(angle) vanishes at relative angle 0 or pi, where the
// loss is non-differentiable and the degenerate flag is raised instead.
RegressionLoss geodesic_core(const Mat3& rstar_t_base, const AxisAngle& local) {
    RegressionLoss out;
    const Mat3 a_mat = rstar_t_base * so3::exp_map(local).m;
    const double c = clamp_unit(0.5 * (a_mat.trace() - 1.0));
    out.loss = std::acos(c);
    const Vec3 a = so3::vee_antisym(a_mat);
    const double na = norm(a);
    if (na < kDegenerateAxisNorm) {
        out.degenerate = true;
        out.grad = {0.0, 0.0, 0.0};
        return out;
    }
    const Vec3 axis = a * (1.0 / na);
    out.grad = so3::exp_jacobian(local).transpose() * axis;
    return out;
}

} // namespace

RegressionLoss loss_regression(const AxisAngle& y_pred, const AxisAngle& y_star,
                               RegressionMetric metric) {
    if (!is_finite(y_pred) || !is_finite(y_star))
        throw std::invalid_argument("loss_regression: non-finite input");
    if (metric == RegressionMetric::euclidean) {
        RegressionLoss out;
        const Vec3 d = y_pred - y_star;
        out.loss = dot(d, d);
        out.grad = d * 2.0;
        return out;
    }
    return geodesic_core(so3::exp_map(y_star).m.transpose(), y_pred);
}

RegressionLoss geodesic_compose_loss(const AxisAngle& y_star, const AxisAngle& z,
                                     const AxisAngle& delta, binning::DeltaMode mode) {
    const Mat3 rstar_t = so3::exp_map(y_star).m.transpose();
    if (mode == binning::DeltaMode::additive) return geodesic_core(rstar_t, z + delta);
    return geodesic_core(rstar_t * so3::exp_map(z).m, delta);
}

net::ScalarLoss loss_classification(std::span<const double> logits, std::size_t label) {
    return net::softmax_cross_entropy(logits, label);
}

namespace {

std::size_t argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::size_t selected_bin(const data::PoseSample& s, std::span<const double> logits,
                         const ModelConfig& cfg) {
    if (cfg.bin_selection == BinSelection::teacher_forced) return s.label;
    return argmax_lowest(logits);
}

void require_prepared(const data::PoseSample& s) {
    if (!s.prepared)
        throw std::invalid_argument("sample caches not prepared for this dictionary");
}

} // namespace

HeadLoss loss_simple_bd(const data::PoseSample& s, const HeadOutputs& out,
                        const ModelConfig& cfg, const binning::PoseDictionary& dict) {
    require_prepared(s);
    (void)dict;
    HeadLoss hl;
    const net::ScalarLoss ce = loss_classification(out.logits, s.label);
    hl.dlogits = ce.grad;
    const std::size_t b = selected_bin(s, out.logits, cfg);
    const std::size_t di = per_bin_deltas(cfg.variant) ? b : 0;
    const Vec3 r = out.deltas[di] - s.delta_additive;
    hl.loss = ce.loss + cfg.alpha * dot(r, r);
    hl.ddeltas.assign(out.deltas.size(), Vec3{});
    hl.ddeltas[di] = r * (2.0 * cfg.alpha);
    return hl;
}

HeadLoss loss_geodesic_bd(const data::PoseSample& s, const HeadOutputs& out,
                          const ModelConfig& cfg, const binning::PoseDictionary& dict) {
    require_prepared(s);
    HeadLoss hl;
    const net::ScalarLoss ce = loss_classification(out.logits, s.label);
    hl.dlogits = ce.grad;
    const std::size_t b = selected_bin(s, out.logits, cfg);
    const std::size_t di = per_bin_deltas(cfg.variant) ? b : 0;
    const RegressionLoss g = geodesic_compose_loss(s.pose, dict.key_poses[b],
                                                   out.deltas[di], cfg.compose_mode);
    hl.loss = ce.loss + cfg.alpha * g.loss;
    hl.ddeltas.assign(out.deltas.size(), Vec3{});
    hl.ddeltas[di] = g.grad * cfg.alpha;
    if (g.degenerate) hl.degenerate_count += 1;
    return hl;
}

HeadLoss loss_riemannian_bd(const data::PoseSample& s, const HeadOutputs& out,
                            const ModelConfig& cfg, const binning::PoseDictionary& dict) {
    require_prepared(s);
    (void)dict;
    HeadLoss hl;
    const net::ScalarLoss ce = loss_classification(out.logits, s.label);
    hl.dlogits = ce.grad;
    const std::size_t b = selected_bin(s, out.logits, cfg);
    const std::size_t di = per_bin_deltas(cfg.variant) ? b : 0;
    const Vec3 r = out.deltas[di] - s.delta_riemannian;
    hl.loss = ce.loss + cfg.alpha * dot(r, r);
    hl.ddeltas.assign(out.deltas.size(), Vec3{});
    hl.ddeltas[di] = r * (2.0 * cfg.alpha);
    return hl;
}

HeadLoss loss_probabilistic_bd(const data::PoseSample& s, const HeadOutputs& out,
                               const ModelConfig& cfg, const binning::PoseDictionary& dict) {
    require_prepared(s);
    HeadLoss hl;
    const net::ScalarLoss kl = net::kl_divergence(s.soft, out.logits);
    hl.dlogits = kl.grad;
    const std::vector<double> p = net::softmax(out.logits);
    const std::size_t k = dict.size();
    hl.ddeltas.assign(out.deltas.size(), Vec3{});

    std::vector<double> pose_losses(k);
    double pose_term = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t di = per_bin_deltas(cfg.variant) ? j : 0;
        const RegressionLoss g = geodesic_compose_loss(s.pose, dict.key_poses[j],
                                                       out.deltas[di], cfg.compose_mode);
        pose_losses[j] = g.loss;
        pose_term += p[j] * g.loss;
        hl.ddeltas[di] += g.grad * (cfg.alpha * p[j]);
        if (g.degenerate) hl.degenerate_count += 1;
    }
    // d pose_term / d logit_j = p_j (L_j - sum_k p_k L_k)
    for (std::size_t j = 0; j < k; ++j)
        hl.dlogits[j] += cfg.alpha * p[j] * (pose_losses[j] - pose_term);
    hl.loss = kl.loss + cfg.alpha * pose_term;
    return hl;
}

HeadLoss sample_loss(const data::PoseSample& s, const HeadOutputs& out,
                     const ModelConfig& cfg, const binning::PoseDictionary& dict) {
    switch (cfg.variant) {
        case Variant::RE:
        case Variant::RG: {
            const RegressionLoss r =
                loss_regression(out.regression, s.pose,
                                cfg.variant == Variant::RE ? RegressionMetric::euclidean
                                                           : RegressionMetric::geodesic);
            HeadLoss hl;
            hl.loss = r.loss;
            hl.dregression = r.grad;
            if (r.degenerate) hl.degenerate_count += 1;
            return hl;
        }
        case Variant::C: {
            require_prepared(s);
            const net::ScalarLoss ce = loss_classification(out.logits, s.label);
            HeadLoss hl;
            hl.loss = ce.loss;
            hl.dlogits = ce.grad;
            return hl;
        }
        case Variant::MS:
        case Variant::MSp:
            return loss_simple_bd(s, out, cfg, dict);
        case Variant::MG:
        case Variant::MGp:
            return loss_geodesic_bd(s, out, cfg, dict);
        case Variant::MR:
        case Variant::MRp:
            return loss_riemannian_bd(s, out, cfg, dict);
        case Variant::MP:
        case Variant::MPp:
            return loss_probabilistic_bd(s, out, cfg, dict);
    }
    throw std::logic_error("sample_loss: unhandled variant");
}

AxisAngle predict_pose(const ModelParams& params, std::span<const double> features) {
    const ModelConfig& cfg = params.cfg;
    if (is_regression_baseline(cfg.variant)) {
        const std::vector<double> y = net::forward(*params.regressor, features);
        return so3::canonicalize(AxisAngle{y[0], y[1], y[2]});
    }
    const std::vector<double> logits = net::forward(*params.bin, features);
    const std::size_t l = argmax_lowest(logits);
    if (cfg.variant == Variant::C) return params.dict.key_poses[l];
    const std::size_t di = per_bin_deltas(cfg.variant) ? l : 0;
    const std::vector<double> d = net::forward(params.deltas[di], features);
    return compose(params.dict.key_poses[l], AxisAngle{d[0], d[1], d[2]}, cfg.compose_mode);
}

ModelGrads make_model_grads(const ModelParams& p) {
    ModelGrads g;
    if (p.bin) g.bin = net::make_grads(*p.bin);
    if (p.regressor) g.regressor = net::make_grads(*p.regressor);
    for (const auto& d : p.deltas) g.deltas.push_back(net::make_grads(d));
    return g;
}

void ModelGrads::zero_all() {
    if (bin) bin->zero();
    if (regressor) regressor->zero();
    for (auto& d : deltas) d.zero();
}

namespace {

struct EvalContext {
    HeadOutputs out;
    HeadLoss hl;
    std::optional<net::GradTape> bin_tape;
    std::optional<net::GradTape> reg_tape;
    std::vector<std::optional<net::GradTape>> delta_tapes;
    std::uint64_t signature = 0;
    bool finite = true;
};

bool all_finite(const HeadOutputs& out) {
    for (double v : out.logits)
        if (!std::isfinite(v)) return false;
    if (!is_finite(out.regression)) return false;
    for (const auto& d : out.deltas)
        if (!is_finite(d)) return false;
    return true;
}

void hash_mix(std::uint64_t& h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

Vec3 to_vec3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

EvalContext evaluate_sample(const ModelParams& p, const data::PoseSample& s, Variant v) {
    ModelConfig cfg = p.cfg;
    cfg.variant = v;
    EvalContext ctx;
    ctx.delta_tapes.resize(p.deltas.size());
    ctx.out.deltas.assign(p.deltas.size(), Vec3{});

    if (is_regression_baseline(v)) {
        ctx.reg_tape.emplace();
        ctx.out.regression = to_vec3(net::forward(*p.regressor, s.features, &*ctx.reg_tape));
    } else {
        ctx.bin_tape.emplace();
        ctx.out.logits = net::forward(*p.bin, s.features, &*ctx.bin_tape);
    }

    std::size_t b = 0;
    if (has_delta_network(v)) {
        b = selected_bin(s, ctx.out.logits, cfg);
        if (v == Variant::MPp) {
            for (std::size_t i = 0; i < p.deltas.size(); ++i) {
                ctx.delta_tapes[i].emplace();
                ctx.out.deltas[i] =
                    to_vec3(net::forward(p.deltas[i], s.features, &*ctx.delta_tapes[i]));
            }
        } else {
            const std::size_t di = per_bin_deltas(v) ? b : 0;
            ctx.delta_tapes[di].emplace();
            ctx.out.deltas[di] =
                to_vec3(net::forward(p.deltas[di], s.features, &*ctx.delta_tapes[di]));
        }
    }

    if (!all_finite(ctx.out)) {
        // exploded parameters; report an infinite loss so the trainer's
        // divergence handling takes over
        ctx.finite = false;
        ctx.hl.loss = std::numeric_limits<double>::infinity();
        ctx.hl.ddeltas.assign(p.deltas.size(), Vec3{});
        ctx.hl.dlogits.assign(ctx.out.logits.size(), 0.0);
        return ctx;
    }
    ctx.hl = sample_loss(s, ctx.out, cfg, p.dict);

    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    if (ctx.bin_tape) hash_mix(h, ctx.bin_tape->activation_signature());
    if (ctx.reg_tape) hash_mix(h, ctx.reg_tape->activation_signature());
    for (const auto& t : ctx.delta_tapes)
        if (t) hash_mix(h, t->activation_signature());
    hash_mix(h, b);
    hash_mix(h, std::uint64_t(ctx.hl.degenerate_count));
    ctx.signature = h;
    return ctx;
}

} // namespace

double accumulate_sample_gradients(const ModelParams& p, const data::PoseSample& s,
                                   ModelGrads& grads, int* degenerate_count,
                                   std::optional<Variant> variant_override) {
    const Variant v = variant_override.value_or(p.cfg.variant);
    EvalContext ctx = evaluate_sample(p, s, v);
    if (!ctx.finite) return ctx.hl.loss;

    if (ctx.bin_tape)
        net::backward(*p.bin, *ctx.bin_tape, ctx.hl.dlogits, *grads.bin);
    if (ctx.reg_tape) {
        const double up[3] = {ctx.hl.dregression.x, ctx.hl.dregression.y, ctx.hl.dregression.z};
        net::backward(*p.regressor, *ctx.reg_tape, std::span<const double>(up, 3),
                      *grads.regressor);
    }
    for (std::size_t i = 0; i < ctx.delta_tapes.size(); ++i) {
        if (!ctx.delta_tapes[i]) continue;
        const Vec3& g = ctx.hl.ddeltas[i];
        const double up[3] = {g.x, g.y, g.z};
        net::backward(p.deltas[i], *ctx.delta_tapes[i], std::span<const double>(up, 3),
                      grads.deltas[i]);
    }
    if (degenerate_count) *degenerate_count += ctx.hl.degenerate_count;
    return ctx.hl.loss;
}

double sample_loss_value(const ModelParams& p, const data::PoseSample& s,
                         std::optional<Variant> variant_override) {
    const Variant v = variant_override.value_or(p.cfg.variant);
    return evaluate_sample(p, s, v).hl.loss;
}

std::uint64_t model_signature(const ModelParams& p, const data::PoseSample& s,
                              std::optional<Variant> variant_override) {
    const Variant v = variant_override.value_or(p.cfg.variant);
    return evaluate_sample(p, s, v).signature;
}

std::size_t flat_parameter_count(const ModelParams& p) {
    std::size_t n = 0;
    if (p.bin) n += p.bin->parameter_count();
    if (p.regressor) n += p.regressor->parameter_count();
    for (const auto& d : p.deltas) n += d.parameter_count();
    return n;
}

double get_flat_parameter(const ModelParams& p, std::size_t i) {
    if (p.bin) {
        if (i < p.bin->parameter_count()) return p.bin->get_flat(i);
        i -= p.bin->parameter_count();
    }
    if (p.regressor) {
        if (i < p.regressor->parameter_count()) return p.regressor->get_flat(i);
        i -= p.regressor->parameter_count();
    }
    for (const auto& d : p.deltas) {
        if (i < d.parameter_count()) return d.get_flat(i);
        i -= d.parameter_count();
    }
    throw std::out_of_range("get_flat_parameter");
}

void set_flat_parameter(ModelParams& p, std::size_t i, double v) {
    if (p.bin) {
        if (i < p.bin->parameter_count()) {
            p.bin->set_flat(i, v);
            return;
        }
        i -= p.bin->parameter_count();
    }
    if (p.regressor) {
        if (i < p.regressor->parameter_count()) {
            p.regressor->set_flat(i, v);
            return;
        }
        i -= p.regressor->parameter_count();
    }
    for (auto& d : p.deltas) {
        if (i < d.parameter_count()) {
            d.set_flat(i, v);
            return;
        }
        i -= d.parameter_count();
    }
    throw std::out_of_range("set_flat_parameter");
}

std::vector<double> flatten_gradients(const ModelParams& p, const ModelGrads& g) {
    std::vector<double> out;
    out.reserve(flat_parameter_count(p));
    const auto append = [&out](const net::MlpGrads& mg) {
        for (std::size_t l = 0; l < mg.weights.size(); ++l) {
            out.insert(out.end(), mg.weights[l].begin(), mg.weights[l].end());
            out.insert(out.end(), mg.biases[l].begin(), mg.biases[l].end());
        }
    };
    if (p.bin) append(*g.bin);
    if (p.regressor) append(*g.regressor);
    for (std::size_t i = 0; i < p.deltas.size(); ++i) append(g.deltas[i]);
    return out;
}

namespace {

double grad_squared_norm(const ModelGrads& g) {
    double acc = 0.0;
    const auto add = [&acc](const net::MlpGrads& mg) {
        for (const auto& w : mg.weights) acc += kernels::dot(w.data(), w.data(), w.size());
        for (const auto& b : mg.biases) acc += kernels::dot(b.data(), b.data(), b.size());
    };
    if (g.bin) add(*g.bin);
    if (g.regressor) add(*g.regressor);
    for (const auto& d : g.deltas) add(d);
    return acc;
}

void scale_grads(ModelGrads& g, double s) {
    const auto apply = [s](net::MlpGrads& mg) {
        for (auto& w : mg.weights) kernels::scale(s, w.data(), w.size());
        for (auto& b : mg.biases) kernels::scale(s, b.data(), b.size());
    };
    if (g.bin) apply(*g.bin);
    if (g.regressor) apply(*g.regressor);
    for (auto& d : g.deltas) apply(d);
}

struct Optimizers {
    std::optional<net::AdamState> bin;
    std::optional<net::AdamState> regressor;
    std::vector<net::AdamState> deltas;

    void set_epoch(std::uint64_t e) {
        if (bin) bin->epoch = e;
        if (regressor) regressor->epoch = e;
        for (auto& d : deltas) d.epoch = e;
    }
};

Optimizers make_optimizers(const ModelParams& p, const net::AdamConfig& cfg) {
    Optimizers o;
    if (p.bin) o.bin = net::make_adam(*p.bin, cfg);
    if (p.regressor) o.regressor = net::make_adam(*p.regressor, cfg);
    for (const auto& d : p.deltas) o.deltas.push_back(net::make_adam(d, cfg));
    return o;
}

void optimizer_step(ModelParams& p, const ModelGrads& g, Optimizers& o) {
    if (p.bin) net::adam_step(*p.bin, *g.bin, *o.bin);
    if (p.regressor) net::adam_step(*p.regressor, *g.regressor, *o.regressor);
    for (std::size_t i = 0; i < p.deltas.size(); ++i)
        net::adam_step(p.deltas[i], g.deltas[i], o.deltas[i]);
}

} // namespace

TrainResult train(const ModelConfig& cfg, const data::Dataset& train_split,
                  const data::Dataset& val_split, const TrainConfig& tcfg,
                  const binning::PoseDictionary* dict_in) {
    if (train_split.size() == 0) throw std::invalid_argument("train: empty training split");
    if (tcfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");

    const Rng root(tcfg.seed);
    data::Dataset tr = train_split;
    data::Dataset va = val_split;

    TrainResult result;
    binning::PoseDictionary dict;
    double gamma_eff = cfg.gamma;
    if (has_bin_network(cfg.variant)) {
        const auto poses = tr.poses();
        dict = dict_in ? *dict_in
                       : binning::kmeans_fit(poses, cfg.k, root.fork("kmeans").next_u64());
        if (gamma_eff <= 0.0) gamma_eff = binning::default_gamma(dict, poses);
        data::attach_dictionary(tr, dict, gamma_eff);
        if (va.size() > 0) data::attach_dictionary(va, dict, gamma_eff);
    }
    result.effective_gamma = gamma_eff;

    ModelConfig cfg_eff = cfg;
    cfg_eff.gamma = gamma_eff;
    ModelParams params = initialize(cfg_eff, dict, root.fork("init").next_u64());

    net::AdamConfig acfg;
    acfg.base_lr = tcfg.lr;
    acfg.lr_decay = tcfg.lr_decay;
    Optimizers opt = make_optimizers(params, acfg);
    ModelGrads grads = make_model_grads(params);

    const bool warm_start = cfg.variant == Variant::MG || cfg.variant == Variant::MGp;
    Rng shuffle_rng = root.fork("shuffle");

    std::vector<std::size_t> order(tr.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const auto eval_epoch = [&](std::size_t epoch, double train_loss, std::size_t degen) {
        EpochStats st;
        st.epoch = epoch;
        st.train_loss = train_loss;
        st.degenerate_count = degen;
        if (va.size() > 0) {
            std::vector<double> errs;
            errs.reserve(va.size());
            std::size_t hits = 0;
            for (const auto& s : va.samples) {
                const double e = eval::angle_error(predict_pose(params, s.features), s.pose);
                errs.push_back(e);
                if (e < so3::kPi / 6.0) ++hits;
            }
            std::sort(errs.begin(), errs.end());
            st.val_mederr_deg = errs[(errs.size() - 1) / 2] * (180.0 / so3::kPi);
            st.val_acc_pi6 = double(hits) / double(errs.size());
        }
        result.history.push_back(st);
    };

    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        opt.set_epoch(epoch);
        const std::optional<Variant> objective =
            (warm_start && epoch == 0)
                ? std::optional<Variant>(cfg.variant == Variant::MG ? Variant::MS
                                                                    : Variant::MSp)
                : std::nullopt;

        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        const ModelParams snapshot = params;
        double epoch_loss = 0.0;
        int degen = 0;
        bool failed = false;
        std::string detail;

        for (std::size_t start = 0; start < order.size() && !failed;
             start += tcfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
            grads.zero_all();
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const double l = accumulate_sample_gradients(params, tr.samples[order[i]],
                                                             grads, &degen, objective);
                batch_loss += l;
            }
            if (!std::isfinite(batch_loss)) {
                failed = true;
                detail = "non-finite loss at epoch " + std::to_string(epoch);
                break;
            }
            epoch_loss += batch_loss;
            const double inv = 1.0 / double(end - start);
            scale_grads(grads, inv);
            if (cfg.clip_gradients) {
                const double gn = std::sqrt(grad_squared_norm(grads));
                if (gn > cfg.clip_norm) scale_grads(grads, cfg.clip_norm / gn);
            }
            try {
                optimizer_step(params, grads, opt);
            } catch (const net::TrainingDivergenceError& e) {
                failed = true;
                detail = std::string(e.what()) + " at epoch " + std::to_string(epoch);
            }
        }

        if (failed) {
            params = snapshot; // last-good checkpoint
            result.diverged = true;
            result.divergence_detail = detail;
            break;
        }
        eval_epoch(epoch, epoch_loss / double(tr.size()), std::size_t(degen));
    }

    result.params = std::move(params);
    return result;
}

} // namespace bindelta::models
