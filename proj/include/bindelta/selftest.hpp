#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bindelta/binning.hpp"
#include "bindelta/models.hpp"
#include "bindelta/so3.hpp"

namespace bindelta::selftest {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail; // worst value, probe counts, ...
};

/// Replaceable internals, so tests can verify that a corrupted primitive
/// is caught and named by the right property.
struct Hooks {
    std::function<AxisAngle(const RotationMatrix&)> log_map = [](const RotationMatrix& r) {
        return so3::log_map(r);
    };
};

// Individual checks, parameterized so the acceptance suite can pin its
// own sample counts and tolerances.
CheckResult check_so3_roundtrip(std::size_t n, double max_norm, double tol,
                                const Hooks& hooks = {});
CheckResult check_trace_formula(std::size_t n, double tol);
CheckResult check_bi_invariance(std::size_t n, double tol);
CheckResult check_triangle_inequality(std::size_t n, double slack);
CheckResult check_exp_jacobian(std::size_t n, double tol);
CheckResult check_kernel_equivalence();
CheckResult check_composition_roundtrip(binning::DeltaMode mode, std::size_t n, double tol);
CheckResult check_variant_gradients(models::Variant v, int min_probes, std::uint64_t seed);

/// The full property suite: SO(3) round trips and metric identities,
/// kernel backend equivalence, binning invariants, composition round
/// trips, gradient checks for all eleven variants, metric fixtures.
std::vector<CheckResult> run_all_checks(const Hooks& hooks = {});

/// Pretty-print one line per check; returns true when everything passed.
bool report(const std::vector<CheckResult>& results, std::ostream& os);

/// Published per-category results in the report CSV layout, used as a
/// documentation fixture.
extern const char* kPublishedTableFixtureCsv;

} // namespace bindelta::selftest
