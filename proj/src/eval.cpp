#include "bindelta/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bindelta::eval {

double angle_error(const AxisAngle& y_pred, const AxisAngle& y_star) {
    if (!is_finite(y_pred) || !is_finite(y_star))
        throw std::invalid_argument("angle_error: non-finite input");
    return so3::geodesic_distance(so3::exp_map(y_pred), so3::exp_map(y_star));
}

double median(std::vector<double> values, MedianRule rule) {
    if (values.empty()) throw std::invalid_argument("median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (rule == MedianRule::interpolated && n % 2 == 0)
        return 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return values[(n - 1) / 2];
}

double accuracy_at(std::span<const double> errors, double threshold) {
    if (errors.empty()) throw std::invalid_argument("accuracy_at: empty input");
    std::size_t hits = 0;
    for (double e : errors)
        if (e < threshold) ++hits;
    return double(hits) / double(errors.size());
}

MetricReport compute_metrics(std::span<const AxisAngle> preds,
                             std::span<const AxisAngle> gts,
                             std::span<const int> categories, MedianRule rule) {
    if (preds.size() != gts.size() || preds.size() != categories.size())
        throw std::invalid_argument("compute_metrics: length mismatch");
    if (preds.empty()) throw std::invalid_argument("compute_metrics: empty input");

    std::map<int, std::vector<double>> per_cat;
    for (std::size_t i = 0; i < preds.size(); ++i)
        per_cat[categories[i]].push_back(angle_error(preds[i], gts[i]));

    const double rad2deg = 180.0 / so3::kPi;

    MetricReport r;
    for (auto& [cat, errs] : per_cat) {
        CategoryMetrics m;
        m.name = std::to_string(cat);
        m.count = errs.size();
        m.acc_pi6 = accuracy_at(errs, so3::kPi / 6.0);
        m.mederr_deg = median(errs, rule) * rad2deg;
        r.mean_mederr_deg += m.mederr_deg;
        r.mean_acc += m.acc_pi6;
        r.categories.push_back(std::move(m));
    }
    r.mean_mederr_deg /= double(r.categories.size());
    r.mean_acc /= double(r.categories.size());
    return r;
}

namespace {

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    return cells;
}

} // namespace

std::string report_to_csv(const MetricReport& r) {
    std::string out = "category";
    for (const auto& c : r.categories) out += "," + c.name;
    out += ",mean\nmederr_deg";
    for (const auto& c : r.categories) out += "," + format_fixed(c.mederr_deg, 2);
    out += "," + format_fixed(r.mean_mederr_deg, 2) + "\nacc_pi6";
    for (const auto& c : r.categories) out += "," + format_fixed(c.acc_pi6, 4);
    out += "," + format_fixed(r.mean_acc, 4) + "\ncount";
    std::size_t total = 0;
    for (const auto& c : r.categories) {
        out += "," + std::to_string(c.count);
        total += c.count;
    }
    out += "," + std::to_string(total) + "\n";
    return out;
}

void emit_report_csv(const MetricReport& r, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_report_csv: cannot open " + path.string());
    os << report_to_csv(r);
    if (!os) throw std::runtime_error("emit_report_csv: write failed");
}

MetricReport parse_report_csv(const std::string& text) {
    std::stringstream is(text);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.size() < 3 || rows[0].empty() || rows[0][0] != "category")
        throw std::runtime_error("parse_report_csv: missing category header");
    const std::size_t ncols = rows[0].size();
    if (ncols < 2 || rows[0].back() != "mean")
        throw std::runtime_error("parse_report_csv: missing mean column");

    MetricReport r;
    r.categories.resize(ncols - 2);
    for (std::size_t i = 1; i + 1 < ncols; ++i) r.categories[i - 1].name = rows[0][i];

    bool saw_mederr = false, saw_acc = false;
    for (std::size_t ri = 1; ri < rows.size(); ++ri) {
        const auto& row = rows[ri];
        if (row.size() != ncols)
            throw std::runtime_error("parse_report_csv: ragged row " + std::to_string(ri + 1));
        if (row[0] == "mederr_deg") {
            for (std::size_t i = 1; i + 1 < ncols; ++i)
                r.categories[i - 1].mederr_deg = std::stod(row[i]);
            r.mean_mederr_deg = std::stod(row.back());
            saw_mederr = true;
        } else if (row[0] == "acc_pi6") {
            for (std::size_t i = 1; i + 1 < ncols; ++i)
                r.categories[i - 1].acc_pi6 = std::stod(row[i]);
            r.mean_acc = std::stod(row.back());
            saw_acc = true;
        } else if (row[0] == "count") {
            for (std::size_t i = 1; i + 1 < ncols; ++i)
                r.categories[i - 1].count = std::size_t(std::stoull(row[i]));
        } else {
            throw std::runtime_error("parse_report_csv: unknown row '" + row[0] + "'");
        }
    }
    if (!saw_mederr || !saw_acc)
        throw std::runtime_error("parse_report_csv: incomplete report");
    return r;
}

MetricReport load_report_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_report_csv: cannot open " + path.string());
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_report_csv(buf.str());
}

void emit_report_json(const MetricReport& r, const std::filesystem::path& path) {
    nlohmann::json j;
    auto cats = nlohmann::json::array();
    for (const auto& c : r.categories)
        cats.push_back({{"name", c.name},
                        {"mederr_deg", c.mederr_deg},
                        {"acc_pi6", c.acc_pi6},
                        {"count", c.count}});
    j["categories"] = cats;
    j["mean"] = {{"mederr_deg", r.mean_mederr_deg}, {"acc_pi6", r.mean_acc}};
    if (!r.variant.empty()) j["variant"] = r.variant;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_report_json: cannot open " + path.string());
    os << j.dump(2) << "\n";
}

MetricReport load_report_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_report_json: cannot open " + path.string());
    nlohmann::json j;
    is >> j;
    MetricReport r;
    for (const auto& c : j.at("categories")) {
        CategoryMetrics m;
        m.name = c.at("name").get<std::string>();
        m.mederr_deg = c.at("mederr_deg").get<double>();
        m.acc_pi6 = c.at("acc_pi6").get<double>();
        m.count = c.at("count").get<std::size_t>();
        r.categories.push_back(std::move(m));
    }
    r.mean_mederr_deg = j.at("mean").at("mederr_deg").get<double>();
    r.mean_acc = j.at("mean").at("acc_pi6").get<double>();
    r.variant = j.value("variant", "");
    return r;
}

} // namespace bindelta::eval
