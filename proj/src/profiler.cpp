#include "mose/profiler.hpp"

#include "mose/errors.hpp"
#include "mose/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

namespace mose {

DirtyRateEstimate estimate_dirty_rate(std::span<const DirtySample> samples, double state_size_bytes,
                                      double page_size_bytes)
{
    if (samples.empty())
        throw std::domain_error("estimate_dirty_rate: no samples");
    if (!(page_size_bytes > 0.0) || !(state_size_bytes >= page_size_bytes))
        throw std::domain_error("estimate_dirty_rate: state size must be at least one page");

    DirtyRateEstimate est;
    double sum = 0.0;
    bool first = true;
    for (const auto& s : samples) {
        if (!(s.window_s > 0.0) || !(s.pages_modified >= 0.0))
            throw std::domain_error("estimate_dirty_rate: invalid sample");
        const double rate = s.pages_modified / s.window_s;
        sum += rate;
        if (first || rate > est.rate_pages_per_s) {
            est.rate_pages_per_s = rate;
            est.window_s = s.window_s;
            first = false;
        }
    }
    est.mean_rate_pages_per_s = sum / static_cast<double>(samples.size());

    const double pages = std::ceil(state_size_bytes / page_size_bytes);
    est.r_min = 1.0 / est.window_s;
    est.r_max = pages / est.window_s;
    if (est.r_max > est.r_min) {
        est.normalized = std::clamp((est.rate_pages_per_s - est.r_min) / (est.r_max - est.r_min), 0.0, 1.0);
    } else {
        // Single-page state: the two anchors coincide.
        est.normalized = est.rate_pages_per_s >= est.r_max ? 1.0 : 0.0;
    }
    return est;
}

double absolute_dirty_rate(double normalized, double state_size_bytes, double page_size_bytes,
                           double window_s)
{
    const double pages = std::ceil(state_size_bytes / page_size_bytes);
    const double r_min = 1.0 / window_s;
    const double r_max = pages / window_s;
    return r_min + normalized * (r_max - r_min);
}

std::vector<DirtyEvent> dprgen_trace(const DprGenConfig& config)
{
    std::vector<DirtyEvent> trace;
    const double rate = config.target_dirty_rate_pages_per_s;
    if (!(config.duration_s > 0.0) || !(rate > 0.0))
        return trace;
    if (!(config.page_size_bytes > 0.0) || !(config.state_size_bytes > 0.0))
        throw std::domain_error("dprgen_trace: state and page size must be positive");

    const auto pages = static_cast<std::uint64_t>(std::ceil(config.state_size_bytes / config.page_size_bytes));
    const auto slots = static_cast<std::uint64_t>(std::floor(rate * config.duration_s));
    Rng rng(config.seed);
    trace.reserve(slots);
    for (std::uint64_t i = 0; i < slots; ++i) {
        const double t = (static_cast<double>(i) + rng.uniform()) / rate;
        trace.push_back({t, rng.below(pages)});
    }
    return trace;
}

std::vector<DirtySample> sample_trace(std::span<const DirtyEvent> trace, double duration_s,
                                      double window_s)
{
    if (!(window_s > 0.0))
        throw std::domain_error("sample_trace: window must be positive");
    const auto windows = static_cast<std::size_t>(std::floor(duration_s / window_s));
    std::vector<std::set<std::uint64_t>> pages(windows);
    for (const auto& ev : trace) {
        const auto w = static_cast<std::size_t>(ev.time_s / window_s);
        if (w < windows)
            pages[w].insert(ev.page_index);
    }
    std::vector<DirtySample> out;
    out.reserve(windows);
    for (const auto& p : pages)
        out.push_back({window_s, static_cast<double>(p.size())});
    return out;
}

namespace {

struct Line {
    double intercept = 0.0;
    double slope = 0.0;
    double rms = 0.0;
};

// Least squares y = a + b x subject to a, b >= 0.
Line fit_nonnegative_line(const std::vector<std::pair<double, double>>& xy)
{
    const double n = static_cast<double>(xy.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : xy) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    auto sse = [&xy](double a, double b) {
        double e = 0.0;
        for (auto [x, y] : xy) {
            const double r = y - (a + b * x);
            e += r * r;
        }
        return e;
    };

    Line best;
    const double det = n * sxx - sx * sx;
    const double a = (sxx * sy - sx * sxy) / det;
    const double b = (n * sxy - sx * sy) / det;
    if (a >= 0.0 && b >= 0.0) {
        best = {a, b, 0.0};
    } else {
        // Optimum lies on a boundary: intercept only, or slope only.
        const Line flat{std::max(0.0, sy / n), 0.0, 0.0};
        const Line ray{0.0, sxx > 0.0 ? std::max(0.0, sxy / sxx) : 0.0, 0.0};
        best = sse(flat.intercept, flat.slope) <= sse(ray.intercept, ray.slope) ? flat : ray;
    }
    best.rms = std::sqrt(sse(best.intercept, best.slope) / n);
    return best;
}

}  // namespace

FitResult fit_params(std::span<const CalibrationRun> runs)
{
    std::set<double> sizes;
    for (const auto& r : runs) {
        if (!(r.image_bytes >= 0.0) || !(r.ckpt_s >= 0.0) || !(r.restore_s >= 0.0) ||
            !(r.transfer_s >= 0.0))
            throw std::domain_error("fit_params: negative calibration value");
        require_positive(r.bandwidth, "fit_params");
        sizes.insert(r.image_bytes);
    }
    if (sizes.size() < 2)
        throw UnderDeterminedError("fit_params: need runs with at least two distinct image sizes");

    std::vector<std::pair<double, double>> ckpt, restore;
    double signaling = 0.0;
    double ns_sum = 0.0, flow_sum = 0.0;
    int ns_n = 0, flow_n = 0;
    for (const auto& r : runs) {
        ckpt.emplace_back(r.image_bytes, r.ckpt_s);
        restore.emplace_back(r.image_bytes, r.restore_s);
        signaling += r.transfer_s - r.image_bytes / r.bandwidth.bytes_per_s();
        if (r.ns_s) {
            ns_sum += *r.ns_s;
            ++ns_n;
        }
        if (r.flow_s) {
            flow_sum += *r.flow_s;
            ++flow_n;
        }
    }
    const double n = static_cast<double>(runs.size());

    const Line c = fit_nonnegative_line(ckpt);
    const Line rs = fit_nonnegative_line(restore);

    FitResult out;
    out.params.ckpt_fixed_s = c.intercept;
    out.params.ckpt_per_byte_s = c.slope;
    out.params.pre_ckpt_fixed_s = c.intercept;
    out.params.pre_ckpt_per_byte_s = c.slope;
    out.params.restore_fixed_s = rs.intercept;
    out.params.restore_per_byte_s = rs.slope;
    out.params.transfer_signaling_s = std::max(0.0, signaling / n);
    out.params.ns_overhead_s = ns_n ? ns_sum / ns_n : 0.0;
    out.params.flow_update_s = flow_n ? flow_sum / flow_n : 0.0;
    out.ckpt_rms_s = c.rms;
    out.restore_rms_s = rs.rms;

    double e = 0.0;
    for (const auto& r : runs) {
        const double d = r.transfer_s - out.params.transfer_s(r.image_bytes, r.bandwidth);
        e += d * d;
    }
    out.transfer_rms_s = std::sqrt(e / n);
    return out;
}

}  // namespace mose
