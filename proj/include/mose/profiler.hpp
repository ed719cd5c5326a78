#pragma once

#include "mose/model.hpp"
#include "mose/units.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mose {

/// Pages modified during one observation window.
struct DirtySample {
    double window_s = 1.0;
    double pages_modified = 0.0;

    friend bool operator==(const DirtySample&, const DirtySample&) = default;
};

struct DirtyRateEstimate {
    double rate_pages_per_s = 0.0;   // worst case over samples
    double mean_rate_pages_per_s = 0.0;
    double normalized = 0.0;         // r in [0, 1]
    double window_s = 0.0;           // window of the maximizing sample
    double r_min = 0.0;
    double r_max = 0.0;
};

/// Worst-case dirty-page rate and its normalization between one page per
/// window and every page per window.
DirtyRateEstimate estimate_dirty_rate(std::span<const DirtySample> samples, double state_size_bytes,
                                      double page_size_bytes);

/// Dirty-page rate in pages/s that maps to normalized rate `r` for the given
/// window.
double absolute_dirty_rate(double normalized, double state_size_bytes, double page_size_bytes,
                           double window_s = 1.0);

struct DprGenConfig {
    double state_size_bytes = 0.0;
    double page_size_bytes = 4096.0;
    double target_dirty_rate_pages_per_s = 0.0;
    double duration_s = 0.0;
    std::uint64_t seed = 0;
};

struct DirtyEvent {
    double time_s;
    std::uint64_t page_index;

    friend bool operator==(const DirtyEvent&, const DirtyEvent&) = default;
};

/// Synthetic dirtying workload with a tightly controlled rate: one write per
/// 1/rate slot, jittered uniformly inside the slot, to a uniformly drawn page.
std::vector<DirtyEvent> dprgen_trace(const DprGenConfig& config);

/// Split a trace into fixed windows and count distinct pages per window.
std::vector<DirtySample> sample_trace(std::span<const DirtyEvent> trace, double duration_s,
                                      double window_s);

struct CalibrationRun {
    double image_bytes = 0.0;
    double ckpt_s = 0.0;
    double restore_s = 0.0;
    double transfer_s = 0.0;
    Bandwidth bandwidth = Bandwidth::mbps(1000);
    std::optional<double> ns_s;     // S2/S4 overhead, when measured
    std::optional<double> flow_s;   // S5, when measured

    friend bool operator==(const CalibrationRun&, const CalibrationRun&) = default;
};

struct FitResult {
    ModelParams params;
    double ckpt_rms_s = 0.0;
    double restore_rms_s = 0.0;
    double transfer_rms_s = 0.0;
};

/// Nonnegative least-squares fit of the affine checkpoint and restore costs
/// and the constant transfer signaling. Pre-checkpoint costs are set equal to
/// the checkpoint costs.
FitResult fit_params(std::span<const CalibrationRun> runs);

}  // namespace mose
