#pragma once

// Worst-case closed-form timing model for Cold, PreCopy and Iterative
// PreCopy migration, and the two inversions the designer needs.
//
// Costs are affine in the image size: a checkpoint of b bytes takes
// ckpt_fixed_s + ckpt_per_byte_s * b, a transfer takes
// transfer_signaling_s + b / L, and so on. Every pre-copy round after the
// initial full copy is assumed to move the worst-case dirty volume
// dirty_rate_norm * state_size_bytes.

#include "mose/units.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace mose {

struct MsProfile {
    double state_size_bytes = 0.0;
    double page_size_bytes = 4096.0;
    double dirty_rate_norm = 0.0;
    double cpu_context_bytes = 0.0;

    void validate() const;

    /// Worst-case volume re-dirtied during one pre-copy round.
    double dirty_volume_bytes() const { return dirty_rate_norm * state_size_bytes; }

    friend bool operator==(const MsProfile&, const MsProfile&) = default;
};

struct ModelParams {
    double ckpt_fixed_s = 0.0;
    double ckpt_per_byte_s = 0.0;
    double pre_ckpt_fixed_s = 0.0;
    double pre_ckpt_per_byte_s = 0.0;
    double restore_fixed_s = 0.0;
    double restore_per_byte_s = 0.0;
    double transfer_signaling_s = 0.0;
    double ns_overhead_s = 0.0;   // S2 and S4 run in parallel
    double flow_update_s = 0.0;   // S5

    void validate() const;

    double checkpoint_s(double bytes) const { return ckpt_fixed_s + ckpt_per_byte_s * bytes; }
    double pre_checkpoint_s(double bytes) const { return pre_ckpt_fixed_s + pre_ckpt_per_byte_s * bytes; }
    double restore_s(double bytes) const { return restore_fixed_s + restore_per_byte_s * bytes; }
    double transfer_s(double bytes, Bandwidth bw) const
    {
        return transfer_signaling_s + bytes / bw.bytes_per_s();
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// COAT Stop&Copy steps. S2 (namespace clear at the source) and S4
/// (namespace re-create at the destination) overlap in time.
enum class Step { S1 = 1, S2, S3, S4, S5, S6 };

std::string_view to_string(Step s);

struct Kpis {
    std::map<Step, double> step_durations_s;
    double downtime_s = 0.0;
    double total_s = 0.0;
    double bytes_transferred = 0.0;

    /// S1 + max(S2, S4) + S3 + S5 + S6.
    double stop_copy_sum_s() const;

    friend bool operator==(const Kpis&, const Kpis&) = default;
};

enum class StrategyKind { Cold, PreCopy, IterativePreCopy };

std::string_view to_string(StrategyKind k);
std::optional<StrategyKind> strategy_kind_from_string(std::string_view s);

/// Strategy plus iteration count. PreCopy is the zero-iteration case of the
/// pre-copy family; Cold never iterates.
class StrategyChoice {
public:
    static StrategyChoice cold() { return StrategyChoice(StrategyKind::Cold, 0); }
    static StrategyChoice precopy() { return StrategyChoice(StrategyKind::PreCopy, 0); }
    static StrategyChoice iterative(int iterations);
    /// PreCopy for 0, IterativePreCopy otherwise.
    static StrategyChoice precopy_family(int iterations);

    StrategyKind kind() const { return kind_; }
    int iterations() const { return iterations_; }

    friend bool operator==(const StrategyChoice&, const StrategyChoice&) = default;

private:
    StrategyChoice(StrategyKind k, int i) : kind_(k), iterations_(i) {}
    StrategyKind kind_;
    int iterations_;
};

/// Phase durations of the pre-copy family under the worst-case assumption.
struct PrecopyTerms {
    double round0_s = 0.0;      // initial full-state copy
    double per_round_s = 0.0;   // each dirty-page round
    double downtime_s = 0.0;    // Stop&Copy
    double stop_copy_image_bytes = 0.0;
};

Kpis cold_kpis(const MsProfile& profile, const ModelParams& params, Bandwidth bandwidth);

Kpis precopy_kpis(const MsProfile& profile, const ModelParams& params, Bandwidth bandwidth,
                  int iterations);

PrecopyTerms precopy_terms(const MsProfile& profile, const ModelParams& params, Bandwidth bandwidth);

/// Stop&Copy step durations for an image of `image_bytes`.
std::map<Step, double> stop_copy_steps(const ModelParams& params, double image_bytes,
                                       Bandwidth bandwidth);

/// KPIs of an arbitrary strategy.
Kpis predict(const MsProfile& profile, const ModelParams& params, Bandwidth bandwidth,
             const StrategyChoice& strategy);

/// Smallest bandwidth whose Cold downtime meets the target, or nullopt when
/// the target is below the bandwidth-independent cost or would need more than
/// `available`.
std::optional<Bandwidth> min_bandwidth(const MsProfile& profile, const ModelParams& params,
                                       double target_downtime_s, Bandwidth available);

inline constexpr int kDefaultIterationCap = 64;

/// Largest pre-copy iteration count whose predicted duration meets the target,
/// or nullopt when even plain PreCopy overruns it.
std::optional<StrategyChoice> max_iterations(const MsProfile& profile, const ModelParams& params,
                                             Bandwidth bandwidth, double target_duration_s,
                                             int iteration_cap = kDefaultIterationCap);

/// Frames an inference service at `fps` misses while frozen for `downtime_s`.
std::int64_t frame_loss(double fps, double downtime_s);

}  // namespace mose
