#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcreg/errors.hpp"
#include "pcreg/geometry.hpp"

namespace pcreg {

// Ordered odometry poses; poses[0] is always the identity.
struct Trajectory {
    std::vector<RigidTransform> poses;
};

// Left-fold of relative motions from the identity: poses[t+1] = poses[t] * rel[t].
Trajectory accumulate_odometry(std::span<const RigidTransform> relative);

// Averaged relative-pose errors over all (start frame, segment length) pairs
// with lengths 100 m, 200 m, ..., 800 m. A segment's end frame is the first
// one whose ground-truth arc length from the start reaches the nominal length.
// segment_count == 0 flags a path too short for even one 100 m segment.
struct SegmentErrors {
    double translation_pct = 0.0;        // mean, percent of segment length
    double rotation_deg_per_100m = 0.0;  // mean chordal degrees per 100 m
    std::size_t segment_count = 0;
};

// Both trajectories must have the same pose count (ShapeError otherwise).
SegmentErrors kitti_segment_errors(const Trajectory& gt,
                                   const Trajectory& pred);

// One evaluated pair. Failed rows keep zero errors and carry the message;
// they are excluded from every aggregate.
struct PairRow {
    std::size_t pair_index = 0;
    double t_err = 0.0;    // Euclidean distance between translations
    double r_err = 0.0;    // chordal rotation error, degrees
    double seconds = 0.0;  // wall-clock time for this pair
    bool failed = false;
    std::string error;
};

// mean / population stddev / max / root-mean-square over non-failed rows;
// all zero when no row survived.
struct ErrorStats {
    double mean = 0.0;
    double stddev = 0.0;
    double max = 0.0;
    double rmse = 0.0;
};

ErrorStats translation_stats(std::span<const PairRow> rows);
ErrorStats rotation_stats(std::span<const PairRow> rows);

struct EvaluationReport {
    std::string method;
    std::uint64_t config_fingerprint = 0;
    std::vector<PairRow> rows;  // dataset order
    ErrorStats translation;
    ErrorStats rotation;
    double total_seconds = 0.0;  // >= sum of per-row seconds

    std::size_t failed_count() const;
};

// Estimates the transform aligning source onto template (template first).
using RegistrationMethod =
    std::function<RigidTransform(const PointCloud&, const PointCloud&)>;

// Runs the method over every pair in dataset order, timing each call.
// A throwing method produces a failed row, never an abort.
// Throws EmptyDatasetError when the dataset has no pairs.
EvaluationReport evaluate_pairs(const RegistrationMethod& method,
                                std::span<const RegistrationPair> dataset,
                                const std::string& method_name,
                                std::uint64_t config_fingerprint = 0);

// CSV with header "pair,t_err,r_err,seconds,failed". Error messages are not
// exported; re-importing reproduces rows and therefore every aggregate.
void export_report(const EvaluationReport& report, const std::string& path);
std::vector<PairRow> read_report_csv(const std::string& path);

// Compact JSON summary: method, fingerprint, row counts, aggregates, timing.
std::string report_summary_json(const EvaluationReport& report);

// One noise level evaluated with one method.
struct NoiseSweepEntry {
    double noise_std = 0.0;
    EvaluationReport report;
};

// CSV with header "noise_std,method,pairs,failed,t_mean,t_std,t_max,t_rmse,
// r_mean,r_std,r_max,r_rmse" and one row per entry, in input order.
void export_noise_sweep(std::span<const NoiseSweepEntry> entries,
                        const std::string& path);

}  // namespace pcreg
