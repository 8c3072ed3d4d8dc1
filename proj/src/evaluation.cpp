#include "pcreg/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pcreg {

Trajectory accumulate_odometry(std::span<const RigidTransform> relative) {
    Trajectory traj;
    traj.poses.reserve(relative.size() + 1);
    traj.poses.push_back(RigidTransform{});
    for (const RigidTransform& rel : relative) {
        traj.poses.push_back(compose(traj.poses.back(), rel));
    }
    return traj;
}

SegmentErrors kitti_segment_errors(const Trajectory& gt,
                                   const Trajectory& pred) {
    if (gt.poses.size() != pred.poses.size()) {
        throw ShapeError("trajectory lengths differ: " +
                         std::to_string(gt.poses.size()) + " vs " +
                         std::to_string(pred.poses.size()));
    }
    const std::size_t n = gt.poses.size();

    // arc[i] = ground-truth path length from frame 0 to frame i
    std::vector<double> arc(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        arc[i] = arc[i - 1] +
                 (gt.poses[i].translation - gt.poses[i - 1].translation).norm();
    }

    SegmentErrors out;
    double t_sum = 0.0, r_sum = 0.0;
    for (std::size_t start = 0; start < n; ++start) {
        std::size_t end = start;
        for (int len = 100; len <= 800; len += 100) {
            const double target = arc[start] + len;
            while (end < n && arc[end] < target) ++end;
            if (end == n) break;

            const RigidTransform gt_rel =
                compose(inverse(gt.poses[start]), gt.poses[end]);
            const RigidTransform pred_rel =
                compose(inverse(pred.poses[start]), pred.poses[end]);
            t_sum += 100.0 * translation_error(pred_rel, gt_rel) / len;
            r_sum += 100.0 * rotation_error_chordal(pred_rel, gt_rel) / len;
            ++out.segment_count;
        }
    }
    if (out.segment_count > 0) {
        out.translation_pct = t_sum / static_cast<double>(out.segment_count);
        out.rotation_deg_per_100m =
            r_sum / static_cast<double>(out.segment_count);
    }
    return out;
}

namespace {

ErrorStats stats_of(std::span<const PairRow> rows, double PairRow::* field) {
    ErrorStats s;
    std::size_t n = 0;
    for (const PairRow& row : rows) {
        if (row.failed) continue;
        const double v = row.*field;
        s.mean += v;
        s.rmse += v * v;
        s.max = std::max(s.max, v);
        ++n;
    }
    if (n == 0) return {};
    const double count = static_cast<double>(n);
    s.mean /= count;
    s.rmse = std::sqrt(s.rmse / count);
    for (const PairRow& row : rows) {
        if (row.failed) continue;
        const double d = row.*field - s.mean;
        s.stddev += d * d;
    }
    s.stddev = std::sqrt(s.stddev / count);
    return s;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ErrorStats translation_stats(std::span<const PairRow> rows) {
    return stats_of(rows, &PairRow::t_err);
}

ErrorStats rotation_stats(std::span<const PairRow> rows) {
    return stats_of(rows, &PairRow::r_err);
}

std::size_t EvaluationReport::failed_count() const {
    std::size_t n = 0;
    for (const PairRow& row : rows) n += row.failed ? 1 : 0;
    return n;
}

EvaluationReport evaluate_pairs(const RegistrationMethod& method,
                                std::span<const RegistrationPair> dataset,
                                const std::string& method_name,
                                std::uint64_t config_fingerprint) {
    if (dataset.empty()) throw EmptyDatasetError("no pairs to evaluate");
    using clock = std::chrono::steady_clock;

    EvaluationReport report;
    report.method = method_name;
    report.config_fingerprint = config_fingerprint;
    report.rows.reserve(dataset.size());

    const auto total_start = clock::now();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        PairRow row;
        row.pair_index = i;
        const auto start = clock::now();
        try {
            const RigidTransform estimate =
                method(dataset[i].template_cloud, dataset[i].source_cloud);
            row.t_err = translation_error(estimate, dataset[i].gt);
            row.r_err = rotation_error_chordal(estimate, dataset[i].gt);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        row.seconds = std::chrono::duration<double>(clock::now() - start).count();
        report.rows.push_back(std::move(row));
    }
    report.total_seconds =
        std::chrono::duration<double>(clock::now() - total_start).count();

    report.translation = translation_stats(report.rows);
    report.rotation = rotation_stats(report.rows);
    return report;
}

void export_report(const EvaluationReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "pair,t_err,r_err,seconds,failed\n";
    for (const PairRow& row : report.rows) {
        f << row.pair_index << ',' << format_double(row.t_err) << ','
          << format_double(row.r_err) << ',' << format_double(row.seconds)
          << ',' << (row.failed ? 1 : 0) << '\n';
    }
    if (!f) throw IoError("failed writing " + path);
}

std::vector<PairRow> read_report_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::string line;
    long line_no = 0;
    if (!std::getline(f, line)) {
        throw ParseError(path, 1, "missing CSV header");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "pair,t_err,r_err,seconds,failed") {
        throw ParseError(path, 1, "unexpected header: " + line);
    }

    std::vector<PairRow> rows;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        PairRow row;
        char c1, c2, c3, c4;
        int failed = 0;
        ls >> row.pair_index >> c1 >> row.t_err >> c2 >> row.r_err >> c3 >>
            row.seconds >> c4 >> failed;
        if (ls.fail() || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' ||
            (failed != 0 && failed != 1)) {
            throw ParseError(path, line_no, "malformed report row");
        }
        row.failed = failed == 1;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string report_summary_json(const EvaluationReport& report) {
    nlohmann::ordered_json j;
    j["method"] = report.method;
    j["config_fingerprint"] = report.config_fingerprint;
    j["pairs"] = report.rows.size();
    j["failed"] = report.failed_count();
    j["translation"] = {{"mean", report.translation.mean},
                        {"stddev", report.translation.stddev},
                        {"max", report.translation.max},
                        {"rmse", report.translation.rmse}};
    j["rotation"] = {{"mean", report.rotation.mean},
                     {"stddev", report.rotation.stddev},
                     {"max", report.rotation.max},
                     {"rmse", report.rotation.rmse}};
    j["total_seconds"] = report.total_seconds;
    return j.dump(2);
}

void export_noise_sweep(std::span<const NoiseSweepEntry> entries,
                        const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "noise_std,method,pairs,failed,t_mean,t_std,t_max,t_rmse,"
         "r_mean,r_std,r_max,r_rmse\n";
    for (const NoiseSweepEntry& entry : entries) {
        const EvaluationReport& r = entry.report;
        f << format_double(entry.noise_std) << ',' << r.method << ','
          << r.rows.size() << ',' << r.failed_count() << ','
          << format_double(r.translation.mean) << ','
          << format_double(r.translation.stddev) << ','
          << format_double(r.translation.max) << ','
          << format_double(r.translation.rmse) << ','
          << format_double(r.rotation.mean) << ','
          << format_double(r.rotation.stddev) << ','
          << format_double(r.rotation.max) << ','
          << format_double(r.rotation.rmse) << '\n';
    }
    if (!f) throw IoError("failed writing " + path);
}

}  // namespace pcreg
