#include "bindelta/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "bindelta/binning.hpp"
#include "bindelta/data.hpp"
#include "bindelta/eval.hpp"
#include "bindelta/kernels.hpp"
#include "bindelta/models.hpp"
#include "bindelta/net.hpp"
#include "bindelta/rng.hpp"

namespace bindelta::selftest {

const char* kPublishedTableFixtureCsv =
    "category,aero,bike,boat,bottle,bus,car,chair,dtable,mbike,sofa,train,tv,mean\n"
    "mederr_deg,8.50,14.80,20.50,7.00,3.10,5.10,9.30,11.30,14.20,10.20,5.60,11.70,10.10\n"
    "acc_pi6,0.8700,0.8100,0.6400,0.9600,0.9700,0.9500,0.9200,0.6700,0.8500,0.9700,"
    "0.8200,0.8800,0.8588\n";

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

AxisAngle random_axis_angle(Rng& rng, double max_norm) {
    // isotropic direction, norm uniform in [0, max_norm)
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = norm(v);
    if (n == 0.0) return {max_norm * 0.5, 0.0, 0.0};
    return v * (rng.uniform() * max_norm / n);
}

double max_abs_diff(const Vec3& a, const Vec3& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

} // namespace

CheckResult check_so3_roundtrip(std::size_t n, double max_norm, double tol,
                                const Hooks& hooks) {
    Rng rng(101);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const AxisAngle y = random_axis_angle(rng, max_norm);
        worst = std::max(worst, max_abs_diff(hooks.log_map(so3::exp_map(y)), y));
    }
    // dedicated pass through the near-pi extraction branch
    double worst_near_pi = 0.0;
    for (std::size_t i = 0; i < n / 20 + 32; ++i) {
        AxisAngle y = random_axis_angle(rng, 1.0);
        const double nn = norm(y);
        if (nn == 0.0) continue;
        const double target = so3::kPi - 1e-6 - rng.uniform() * 9e-5; // inside the branch
        y = y * (target / nn);
        worst_near_pi = std::max(worst_near_pi, max_abs_diff(hooks.log_map(so3::exp_map(y)), y));
    }
    CheckResult r;
    r.name = "so3.exp_log_roundtrip";
    r.passed = worst <= tol && worst_near_pi <= 1e-8;
    r.detail = "max |log(exp(y))-y| = " + fmt(worst) + " (bulk), " + fmt(worst_near_pi) +
               " (theta near pi)";
    return r;
}

CheckResult check_trace_formula(std::size_t n, double tol) {
    Rng rng(102);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const RotationMatrix r1 = so3::sample_uniform_rotation(rng);
        const RotationMatrix r2 = so3::sample_uniform_rotation(rng);
        const double d = so3::geodesic_distance(r1, r2);
        // log-norm route: (1/sqrt(2)) ||log(R1^T R2)||_F = ||log vector||_2
        const AxisAngle y = so3::log_map(RotationMatrix{r1.m.transpose() * r2.m});
        worst = std::max(worst, std::abs(d - norm(y)));
    }
    CheckResult r;
    r.name = "so3.trace_vs_lognorm";
    r.passed = worst <= tol;
    r.detail = "max |acos-route - lognorm-route| = " + fmt(worst);
    return r;
}

CheckResult check_bi_invariance(std::size_t n, double tol) {
    Rng rng(103);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const RotationMatrix r1 = so3::sample_uniform_rotation(rng);
        const RotationMatrix r2 = so3::sample_uniform_rotation(rng);
        const RotationMatrix q = so3::sample_uniform_rotation(rng);
        const double d = so3::geodesic_distance(r1, r2);
        const double dl = so3::geodesic_distance(RotationMatrix{q.m * r1.m},
                                                 RotationMatrix{q.m * r2.m});
        const double dr = so3::geodesic_distance(RotationMatrix{r1.m * q.m},
                                                 RotationMatrix{r2.m * q.m});
        worst = std::max({worst, std::abs(d - dl), std::abs(d - dr)});
    }
    CheckResult r;
    r.name = "so3.bi_invariance";
    r.passed = worst <= tol;
    r.detail = "max deviation = " + fmt(worst);
    return r;
}

CheckResult check_triangle_inequality(std::size_t n, double slack) {
    Rng rng(104);
    double worst = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const RotationMatrix a = so3::sample_uniform_rotation(rng);
        const RotationMatrix b = so3::sample_uniform_rotation(rng);
        const RotationMatrix c = so3::sample_uniform_rotation(rng);
        const double viol = so3::geodesic_distance(a, c) - so3::geodesic_distance(a, b) -
                            so3::geodesic_distance(b, c);
        worst = std::max(worst, viol);
    }
    CheckResult r;
    r.name = "so3.triangle_inequality";
    r.passed = worst <= slack;
    r.detail = "max violation = " + fmt(worst);
    return r;
}

CheckResult check_exp_jacobian(std::size_t n, double tol) {
    Rng rng(105);
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
        const AxisAngle y = random_axis_angle(rng, so3::kPi - 1e-2);
        const Mat3 jr = so3::exp_jacobian(y);
        AxisAngle dir = random_axis_angle(rng, 1.0);
        const double dn = norm(dir);
        if (dn == 0.0) continue;
        dir = dir * (1.0 / dn);
        // finite difference of exp along dir vs the Jacobian prediction:
        // log(exp(y)^T exp(y + h dir)) ~ h J_r(y) dir
        const Mat3 rel = so3::exp_map(y).m.transpose() * so3::exp_map(y + dir * h).m;
        const Vec3 fd = so3::log_map(RotationMatrix{rel}) * (1.0 / h);
        const Vec3 pred = jr * dir;
        const double err = norm(fd - pred) / std::max(1e-9, norm(pred));
        worst = std::max(worst, err);
    }
    CheckResult r;
    r.name = "so3.exp_jacobian_fd";
    r.passed = worst <= tol;
    r.detail = "max relative error = " + fmt(worst);
    return r;
}

CheckResult check_kernel_equivalence() {
    CheckResult r;
    r.name = "kernels.scalar_vs_avx2";
    if (!kernels::cpu_supports_avx2()) {
        r.passed = true;
        r.detail = "avx2 unavailable on this CPU, nothing to compare";
        return r;
    }
    const auto& s = kernels::scalar_table();
    const auto& v = kernels::avx2_table();
    Rng rng(106);
    double worst = 0.0;
    for (std::size_t trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(515);
        const std::size_t rows = 1 + rng.uniform_index(33);
        std::vector<double> a(n), b(n), w(rows * n), g(rows);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        for (auto& x : w) x = rng.normal();
        for (auto& x : g) x = rng.normal();

        const auto rel = [&worst](double x, double y, double scale) {
            worst = std::max(worst, std::abs(x - y) / std::max(1.0, scale));
        };

        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
        rel(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n), scale);
        rel(s.sum(a.data(), n), v.sum(a.data(), n), scale);
        rel(s.max_value(a.data(), n), v.max_value(a.data(), n), 1.0);
        rel(s.squared_distance(a.data(), b.data(), n),
            v.squared_distance(a.data(), b.data(), n), scale);

        std::vector<double> y1(rows), y2(rows);
        s.gemv(w.data(), a.data(), nullptr, y1.data(), rows, n);
        v.gemv(w.data(), a.data(), nullptr, y2.data(), rows, n);
        for (std::size_t i = 0; i < rows; ++i) rel(y1[i], y2[i], scale);

        std::vector<double> dx1(n, 0.1), dx2(n, 0.1);
        s.gemv_t_acc(w.data(), g.data(), dx1.data(), rows, n);
        v.gemv_t_acc(w.data(), g.data(), dx2.data(), rows, n);
        for (std::size_t i = 0; i < n; ++i) rel(dx1[i], dx2[i], double(rows));

        std::vector<double> r1(n), r2(n);
        s.relu(a.data(), r1.data(), n);
        v.relu(a.data(), r2.data(), n);
        for (std::size_t i = 0; i < n; ++i) rel(r1[i], r2[i], 1.0);
        s.relu_backward(a.data(), b.data(), r1.data(), n);
        v.relu_backward(a.data(), b.data(), r2.data(), n);
        for (std::size_t i = 0; i < n; ++i) rel(r1[i], r2[i], 1.0);

        std::vector<double> p1 = a, p2 = a, m1(n, 0.0), m2(n, 0.0), vv1(n, 0.0), vv2(n, 0.0);
        s.adam_update(p1.data(), m1.data(), vv1.data(), b.data(), n, 1e-3, 0.9, 0.999,
                      1e-8, 0.1, 0.001);
        v.adam_update(p2.data(), m2.data(), vv2.data(), b.data(), n, 1e-3, 0.9, 0.999,
                      1e-8, 0.1, 0.001);
        for (std::size_t i = 0; i < n; ++i) rel(p1[i], p2[i], 1.0);
    }
    r.passed = worst <= 1e-11;
    r.detail = "max normalized deviation = " + fmt(worst);
    return r;
}

CheckResult check_kmeans_objective() {
    Rng rng(107);
    std::vector<AxisAngle> poses;
    for (int i = 0; i < 400; ++i)
        poses.push_back(so3::log_map(so3::sample_uniform_rotation(rng)));
    binning::KmeansStats stats;
    binning::kmeans_fit(poses, 12, 42, &stats);
    bool monotone = true;
    for (std::size_t i = 1; i < stats.objective_per_iteration.size(); ++i)
        if (stats.objective_per_iteration[i] > stats.objective_per_iteration[i - 1] + 1e-9)
            monotone = false;
    CheckResult r;
    r.name = "binning.kmeans_objective_monotone";
    r.passed = monotone && !stats.objective_per_iteration.empty();
    r.detail = std::to_string(stats.iterations) + " iterations";
    return r;
}

CheckResult check_soft_hard_consistency() {
    Rng rng(108);
    std::vector<AxisAngle> poses;
    for (int i = 0; i < 300; ++i)
        poses.push_back(so3::log_map(so3::sample_uniform_rotation(rng)));
    const auto dict = binning::kmeans_fit(poses, 10, 7);
    bool ok = true;
    for (int i = 0; i < 500 && ok; ++i) {
        const AxisAngle y = random_axis_angle(rng, so3::kPi - 1e-3);
        const std::size_t hard = binning::assign_hard(y, dict);
        const auto soft = binning::assign_soft(y, dict, 3.0);
        std::size_t am = 0;
        for (std::size_t k = 1; k < soft.p.size(); ++k)
            if (soft.p[k] > soft.p[am]) am = k;
        if (am != hard) ok = false;
        // sharpness grows with gamma
        double prev_max = *std::max_element(soft.p.begin(), soft.p.end());
        for (double g = 30.0; g <= 3000.0; g *= 10.0) {
            const auto sharper = binning::assign_soft(y, dict, g);
            const double mx = *std::max_element(sharper.p.begin(), sharper.p.end());
            if (mx + 1e-12 < prev_max) ok = false;
            prev_max = mx;
        }
    }
    CheckResult r;
    r.name = "binning.soft_hard_consistency";
    r.passed = ok;
    r.detail = ok ? "argmax(soft)=hard, max p monotone in gamma" : "mismatch found";
    return r;
}

CheckResult check_composition_roundtrip(binning::DeltaMode mode, std::size_t n, double tol) {
    Rng rng(109);
    std::vector<AxisAngle> poses;
    for (int i = 0; i < 600; ++i)
        poses.push_back(so3::log_map(so3::sample_uniform_rotation(rng)));
    const auto dict = binning::kmeans_fit(poses, 16, 11);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const AxisAngle y = so3::log_map(so3::sample_uniform_rotation(rng));
        const std::size_t l = binning::assign_hard(y, dict);
        const AxisAngle d = binning::delta_target(y, dict, l, mode);
        const AxisAngle back = models::compose(dict.key_poses[l], d, mode);
        worst = std::max(worst, max_abs_diff(back, y));
    }
    CheckResult r;
    r.name = mode == binning::DeltaMode::additive ? "compose.roundtrip_additive"
                                                  : "compose.roundtrip_riemannian";
    r.passed = worst <= tol;
    r.detail = "max |compose(z, delta*) - y*| = " + fmt(worst);
    return r;
}

CheckResult check_variant_gradients(models::Variant v, int min_probes, std::uint64_t seed) {
    Rng rng(seed);

    // small but non-trivial shapes
    const std::size_t feature_dim = 10, k = 5;
    std::vector<AxisAngle> poses;
    for (int i = 0; i < 60; ++i)
        poses.push_back(so3::log_map(so3::sample_uniform_rotation(rng)));
    const auto dict = binning::kmeans_fit(poses, k, 5);

    models::ModelConfig cfg = models::default_config(v, feature_dim);
    cfg.k = k;
    cfg.bin_hidden = {8, 6};
    cfg.delta_hidden = {6};
    cfg.regressor_hidden = {8, 6};
    cfg.gamma = 2.0;

    models::ModelParams params = models::initialize(cfg, dict, rng.next_u64());

    data::Dataset ds;
    ds.feature_dim = feature_dim;
    for (int i = 0; i < 3; ++i) {
        data::PoseSample s;
        s.pose = so3::log_map(so3::sample_uniform_rotation(rng));
        s.features.resize(feature_dim);
        for (auto& f : s.features) f = rng.normal();
        ds.samples.push_back(std::move(s));
    }
    if (models::has_bin_network(v)) data::attach_dictionary(ds, dict, cfg.gamma);

    models::ModelGrads grads = models::make_model_grads(params);
    grads.zero_all();
    for (const auto& s : ds.samples) models::accumulate_sample_gradients(params, s, grads);
    const std::vector<double> analytic = models::flatten_gradients(params, grads);

    const auto loss = [&]() {
        double acc = 0.0;
        for (const auto& s : ds.samples) acc += models::sample_loss_value(params, s);
        return acc;
    };
    const auto signature = [&]() {
        std::uint64_t h = 0;
        for (const auto& s : ds.samples)
            h = h * 0x100000001b3ULL + models::model_signature(params, s);
        return h;
    };

    Rng probe_rng(seed ^ 0xabcdef);
    const net::GradCheckReport rep = net::grad_check(
        loss, [&](std::size_t i) { return models::get_flat_parameter(params, i); },
        [&](std::size_t i, double x) { models::set_flat_parameter(params, i, x); },
        analytic, models::flat_parameter_count(params), min_probes, 1e-6, probe_rng,
        signature);

    CheckResult r;
    r.name = std::string("grad.") + std::string(models::variant_name(v));
    r.passed = rep.max_rel_error <= 1e-4 && rep.probes_checked >= min_probes;
    r.detail = "max rel err " + fmt(rep.max_rel_error) + " over " +
               std::to_string(rep.probes_checked) + " probes (" +
               std::to_string(rep.probes_skipped) + " skipped at gate boundaries)";
    return r;
}

namespace {

CheckResult check_metrics_three_sample() {
    const double d = so3::kPi / 180.0;
    std::vector<AxisAngle> gts(3, AxisAngle{0, 0, 0});
    std::vector<AxisAngle> preds{{0, 0, 10 * d}, {0, 0, 20 * d}, {0, 0, 40 * d}};
    std::vector<int> cats{0, 0, 0};
    const auto rep = eval::compute_metrics(preds, gts, cats);
    CheckResult r;
    r.name = "metrics.three_sample_fixture";
    r.passed = std::abs(rep.mean_mederr_deg - 20.0) < 1e-9 &&
               std::abs(rep.mean_acc - 2.0 / 3.0) < 1e-12;
    r.detail = "MedErr " + fmt(rep.mean_mederr_deg) + " deg, Acc " + fmt(rep.mean_acc);
    return r;
}

CheckResult check_metrics_published_fixture() {
    const auto rep = eval::parse_report_csv(kPublishedTableFixtureCsv);
    CheckResult r;
    r.name = "metrics.published_table_fixture";
    r.passed = rep.mean_mederr_deg == 10.10 && rep.mean_acc == 0.8588 &&
               rep.categories.size() == 12;
    r.detail = "parsed mean MedErr " + fmt(rep.mean_mederr_deg) + ", mean Acc " +
               fmt(rep.mean_acc);
    return r;
}

} // namespace

std::vector<CheckResult> run_all_checks(const Hooks& hooks) {
    std::vector<CheckResult> out;
    out.push_back(check_so3_roundtrip(10000, so3::kPi - 1e-3, 1e-9, hooks));
    out.push_back(check_trace_formula(10000, 1e-7));
    out.push_back(check_bi_invariance(2000, 1e-9));
    out.push_back(check_triangle_inequality(10000, 1e-9));
    out.push_back(check_exp_jacobian(2000, 1e-5));
    out.push_back(check_kernel_equivalence());
    out.push_back(check_kmeans_objective());
    out.push_back(check_soft_hard_consistency());
    out.push_back(check_composition_roundtrip(binning::DeltaMode::additive, 10000, 1e-9));
    out.push_back(check_composition_roundtrip(binning::DeltaMode::riemannian, 10000, 1e-9));
    for (models::Variant v : models::kAllVariants)
        out.push_back(check_variant_gradients(v, 120, 1234));
    out.push_back(check_metrics_three_sample());
    out.push_back(check_metrics_published_fixture());
    return out;
}

bool report(const std::vector<CheckResult>& results, std::ostream& os) {
    bool all = true;
    for (const auto& r : results) {
        os << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        all = all && r.passed;
    }
    os << (all ? "all checks passed" : "CHECKS FAILED") << "\n";
    return all;
}

} // namespace bindelta::selftest
