#include "bindelta/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bindelta/rng.hpp"

namespace bindelta::data {

std::vector<AxisAngle> Dataset::poses() const {
    std::vector<AxisAngle> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.pose);
    return out;
}

std::vector<int> Dataset::category_ids() const {
    std::set<int> ids;
    for (const auto& s : samples) ids.insert(s.category);
    return {ids.begin(), ids.end()};
}

std::vector<RotationMatrix> symmetry_orbit(const RotationMatrix& r, unsigned s) {
    if (s == 0) throw std::invalid_argument("symmetry_orbit: order must be >= 1");
    std::vector<RotationMatrix> orbit;
    orbit.reserve(s);
    const Mat3 step = so3::rot_z(2.0 * so3::kPi / double(s));
    Mat3 cur = r.m;
    for (unsigned j = 0; j < s; ++j) {
        orbit.push_back(RotationMatrix{cur});
        cur = cur * step;
    }
    return orbit;
}

namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
}

std::vector<double> rotation_entries(const Mat3& m) {
    std::vector<double> v(9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v[i * 3 + j] = m.m[i][j];
    return v;
}

} // namespace

namespace {

std::size_t canonical_orbit_index(const std::vector<RotationMatrix>& orbit) {
    std::size_t best = 0;
    Vec3 best_log = so3::log_map(orbit[0]);
    for (std::size_t j = 1; j < orbit.size(); ++j) {
        const Vec3 lj = so3::log_map(orbit[j]);
        if (lex_less(lj, best_log)) {
            best_log = lj;
            best = j;
        }
    }
    return best;
}

} // namespace

RotationMatrix canonical_orbit_member(const RotationMatrix& r, unsigned s) {
    const auto orbit = symmetry_orbit(r, s);
    return orbit[canonical_orbit_index(orbit)];
}

Dataset generate_synthetic(const SynthConfig& cfg) {
    if (cfg.n_samples < 1) throw std::invalid_argument("generate_synthetic: n_samples >= 1");
    if (cfg.feature_dim < 9) throw std::invalid_argument("generate_synthetic: feature_dim >= 9");
    if (cfg.noise_std < 0.0) throw std::invalid_argument("generate_synthetic: noise_std >= 0");
    if (cfg.symmetry_order < 1) throw std::invalid_argument("generate_synthetic: symmetry_order >= 1");
    if (cfg.symmetry_bias < 0.0 || cfg.symmetry_bias > 1.0)
        throw std::invalid_argument("generate_synthetic: symmetry_bias in [0,1]");

    const Rng root(cfg.seed);
    Rng map_rng = root.fork("feature-map");
    Rng pose_rng = root.fork("poses");
    Rng noise_rng = root.fork("noise");
    Rng branch_rng = root.fork("branch");

    // fixed linear feature map, feature_dim x 9
    std::vector<double> a(cfg.feature_dim * 9);
    for (double& v : a) v = map_rng.normal() / 3.0;

    std::vector<RotationMatrix> modes;
    if (cfg.pose_dist == PoseDistribution::mixture) {
        Rng mode_rng = root.fork("mixture-modes");
        for (std::size_t i = 0; i < std::max<std::size_t>(1, cfg.mixture_modes); ++i)
            modes.push_back(so3::sample_uniform_rotation(mode_rng));
    }

    Dataset ds;
    ds.provenance = Provenance::synthetic;
    ds.category = 0;
    ds.feature_dim = cfg.feature_dim;
    ds.samples.reserve(cfg.n_samples);

    for (std::size_t n = 0; n < cfg.n_samples; ++n) {
        RotationMatrix r = [&] {
            if (cfg.pose_dist == PoseDistribution::uniform)
                return so3::sample_uniform_rotation(pose_rng);
            const auto& center = modes[pose_rng.uniform_index(modes.size())];
            const AxisAngle jitter{pose_rng.normal() * cfg.mixture_std,
                                   pose_rng.normal() * cfg.mixture_std,
                                   pose_rng.normal() * cfg.mixture_std};
            return RotationMatrix{center.m * so3::exp_map(jitter).m};
        }();

        if (cfg.symmetry_order > 1 && cfg.symmetry_bias != 0.5) {
            // Re-draw which orbit member is the truth: canonical with
            // probability symmetry_bias, otherwise a uniformly chosen
            // non-canonical member.
            const auto orbit = symmetry_orbit(r, cfg.symmetry_order);
            const std::size_t ci = canonical_orbit_index(orbit);
            if (branch_rng.uniform() < cfg.symmetry_bias) {
                r = orbit[ci];
            } else {
                std::size_t pick = branch_rng.uniform_index(orbit.size() - 1);
                if (pick >= ci) ++pick;
                r = orbit[pick];
            }
        }

        const RotationMatrix canon = cfg.symmetry_order > 1
                                         ? canonical_orbit_member(r, cfg.symmetry_order)
                                         : r;
        const std::vector<double> vecr = rotation_entries(canon.m);

        PoseSample s;
        s.category = 0;
        s.pose = so3::log_map(r);
        s.features.resize(cfg.feature_dim);
        for (std::size_t i = 0; i < cfg.feature_dim; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < 9; ++j) acc += a[i * 9 + j] * vecr[j];
            if (cfg.noise_std > 0.0) acc += noise_rng.normal() * cfg.noise_std;
            s.features[i] = acc;
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t feature_dim) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_csv: cannot open " + path.string());

    Dataset ds;
    ds.provenance = Provenance::file;
    ds.feature_dim = feature_dim;

    std::string line;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        ++row;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') continue;

        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() &&
                       (cell[used] == ' ' || cell[used] == '\t' || cell[used] == '\r'))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument("trailing characters");
                values.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error("load_csv: row " + std::to_string(row) +
                                         ": unparsable value '" + cell + "'");
            }
        }
        if (values.size() != 4 + feature_dim)
            throw std::runtime_error("load_csv: row " + std::to_string(row) + ": expected " +
                                     std::to_string(4 + feature_dim) + " columns, got " +
                                     std::to_string(values.size()));
        for (double v : values)
            if (!std::isfinite(v))
                throw std::runtime_error("load_csv: row " + std::to_string(row) +
                                         ": non-finite value");
        AxisAngle y{values[1], values[2], values[3]};
        if (norm(y) >= so3::kPi + 1e-6)
            throw std::runtime_error("load_csv: row " + std::to_string(row) +
                                     ": pose norm >= pi");
        PoseSample s;
        s.category = int(values[0]);
        // already-canonical rows round trip bit-exactly; only near-pi
        // overshoot is wrapped
        s.pose = norm(y) < so3::kPi ? y : so3::canonicalize(y);
        s.features.assign(values.begin() + 4, values.end());
        ds.samples.push_back(std::move(s));
    }

    const auto ids = ds.category_ids();
    ds.category = ids.size() == 1 ? ids.front() : -1;
    return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_csv: cannot open " + path.string());
    os << "# category_id, y1, y2, y3, f1..fD\n";
    char buf[32];
    for (const auto& s : ds.samples) {
        os << s.category;
        const double pose_vals[3] = {s.pose.x, s.pose.y, s.pose.z};
        for (double v : pose_vals) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        for (double v : s.features) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        os << '\n';
    }
    if (!os) throw std::runtime_error("save_csv: write failed for " + path.string());
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("split: val_fraction must be in (0,1)");
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_index(i)]);

    const std::size_t n_val = std::size_t(std::llround(val_fraction * double(ds.size())));
    Dataset train = ds, val = ds;
    train.samples.clear();
    val.samples.clear();
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val : train).samples.push_back(ds.samples[order[i]]);
    return {std::move(train), std::move(val)};
}

Dataset filter_category(const Dataset& ds, int category) {
    Dataset out = ds;
    out.samples.clear();
    out.category = category;
    for (const auto& s : ds.samples)
        if (s.category == category) out.samples.push_back(s);
    return out;
}

void attach_dictionary(Dataset& ds, const binning::PoseDictionary& dict, double gamma) {
    for (auto& s : ds.samples) {
        s.label = binning::assign_hard(s.pose, dict);
        s.delta_additive = binning::delta_target(s.pose, dict, s.label,
                                                 binning::DeltaMode::additive);
        s.delta_riemannian = binning::delta_target(s.pose, dict, s.label,
                                                   binning::DeltaMode::riemannian);
        s.soft = binning::assign_soft(s.pose, dict, gamma).p;
        s.prepared = true;
    }
}

} // namespace bindelta::data
