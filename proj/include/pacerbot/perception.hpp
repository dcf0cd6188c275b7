// Synthetic ground-plane imaging and line detection.
//
// Images are rectified top-down patches in the robot frame (x forward,
// y left). Pixel (row, col) centers map to ground coordinates
//   x_fwd = (height - row - 0.5) * resolution
//   y_left = ((width - 1) / 2 - col) * resolution
// so row 0 is the far edge and the robot sits just below the bottom row at
// the center column. Detection is adaptive thresholding, 8-connected
// components and a principal-axis fit per component.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <vector>

#include "pacerbot/common.hpp"
#include "pacerbot/plant.hpp"
#include "pacerbot/rng.hpp"
#include "pacerbot/track.hpp"

namespace pacerbot {

struct GroundImage {
    int width = 0;   // px
    int height = 0;  // px
    double resolution = 0.02;  // m/px
    Vec2 origin;     // robot-frame coordinates of pixel (0, 0) center
    std::vector<float> intensity;  // row-major, values in [0, 1]

    float at(int row, int col) const { return intensity[static_cast<std::size_t>(row) * width + col]; }
    float& at(int row, int col) { return intensity[static_cast<std::size_t>(row) * width + col]; }

    /// Ground point (robot frame) of a pixel center.
    Vec2 pixel_to_ground(double row, double col) const {
        return {origin.x - row * resolution, origin.y - col * resolution};
    }
};

struct RenderConfig {
    double patch_width = 4.0;       // m across
    double patch_ahead = 6.0;       // m forward
    double resolution = 0.02;       // m/px
    double line_brightness = 0.9;
    double background_brightness = 0.35;
    double pixel_noise_std = 0.05;
    int neighbor_lines = 2;         // lane lines rendered each side of the followed one
    int occlusion_count = 0;        // random dropout rectangles per frame
    int occlusion_size_px = 24;

    void validate() const {
        if (!(patch_width > 0.0) || !(patch_ahead > 0.0) || !(resolution > 0.0))
            throw ConfigError("render: patch dimensions and resolution must be > 0");
        if (pixel_noise_std < 0.0) throw ConfigError("render: pixel_noise_std must be >= 0");
        if (neighbor_lines < 0 || occlusion_count < 0) throw ConfigError("render: counts must be >= 0");
    }
    int width_px() const { return static_cast<int>(std::lround(patch_width / resolution)); }
    int height_px() const { return static_cast<int>(std::lround(patch_ahead / resolution)); }
};

namespace detail {

// 65536 precomputed standard-normal values; pixel noise indexes it with a
// per-frame hash. Drawing fresh Box-Muller pairs per pixel would dominate
// the whole-loop budget at 60k px / frame.
inline const std::array<float, 65536>& gaussian_table() {
    static const std::array<float, 65536> table = [] {
        std::array<float, 65536> t{};
        Rng rng(0x9A7531F0DECAFBADULL);
        for (auto& v : t) v = static_cast<float>(rng.gaussian());
        return t;
    }();
    return table;
}

inline std::uint64_t pixel_hash(std::uint64_t frame_seed, std::uint64_t index) {
    std::uint64_t s = frame_seed ^ (index * 0x9E3779B97F4A7C15ULL);
    return splitmix64_next(s);
}

}  // namespace detail

/// Renders the track lines visible in the robot's ground patch into `img`
/// (reusing its buffers). A ground point is painted as line wherever it lies
/// within line_width/2 of any rendered lane-line centerline.
inline void render_ground_patch_into(GroundImage& img, const RobotState& robot,
                                     const TrackModel& track, const RenderConfig& cfg, Rng& rng) {
    const int w = cfg.width_px();
    const int h = cfg.height_px();
    img.width = w;
    img.height = h;
    img.resolution = cfg.resolution;
    img.origin = {(h - 0.5) * cfg.resolution, (w - 1) * 0.5 * cfg.resolution};
    img.intensity.assign(static_cast<std::size_t>(w) * h, 0.0f);

    const double c = std::cos(robot.theta), s = std::sin(robot.theta);
    const double half_line = track.line_width / 2.0;
    const float line_b = static_cast<float>(cfg.line_brightness);
    const float back_b = static_cast<float>(cfg.background_brightness);
    const int n_lines = cfg.neighbor_lines;

    for (int row = 0; row < h; ++row) {
        const double fx = img.origin.x - row * cfg.resolution;
        for (int col = 0; col < w; ++col) {
            const double fy = img.origin.y - col * cfg.resolution;
            const Vec2 world{robot.x + fx * c - fy * s, robot.y + fx * s + fy * c};
            const double off = signed_lateral_offset(world, track);
            double j = std::round(off / track.lane_width);
            if (j > n_lines) j = n_lines;
            if (j < -n_lines) j = -n_lines;
            const bool on_line = std::fabs(off - j * track.lane_width) <= half_line;
            img.at(row, col) = on_line ? line_b : back_b;
        }
    }

    if (cfg.occlusion_count > 0) {
        for (int k = 0; k < cfg.occlusion_count; ++k) {
            const int r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
            const int c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
            const int r1 = std::min(h, r0 + cfg.occlusion_size_px);
            const int c1 = std::min(w, c0 + cfg.occlusion_size_px);
            for (int r = r0; r < r1; ++r)
                for (int cc = c0; cc < c1; ++cc) img.at(r, cc) = back_b;
        }
    }

    if (cfg.pixel_noise_std > 0.0) {
        const auto& table = detail::gaussian_table();
        const std::uint64_t frame_seed = rng.next_u64();
        const float std_f = static_cast<float>(cfg.pixel_noise_std);
        float* px = img.intensity.data();
        const std::size_t n = img.intensity.size();
        for (std::size_t i = 0; i < n; ++i) {
            const float noise = table[detail::pixel_hash(frame_seed, i) & 0xFFFF] * std_f;
            float v = px[i] + noise;
            px[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        }
    }
}

inline GroundImage render_ground_patch(const RobotState& robot, const TrackModel& track,
                                       const RenderConfig& cfg, Rng& rng) {
    GroundImage img;
    render_ground_patch_into(img, robot, track, cfg, rng);
    return img;
}

struct LineCandidate {
    double centroid_col_norm = 0.0;    // [-1, 1], 0 = image center column
    double angle_from_vertical = 0.0;  // rad, (-pi/2, pi/2]; equals the robot's
                                       // heading misalignment relative to the line
    int pixel_count = 0;
    double offset_m = 0.0;  // lateral offset of the line at the robot row,
                            // same sign convention as lateral_offset()
};

struct DetectConfig {
    int threshold_window = 31;    // px, local-mean window (odd)
    double threshold_offset = 0.08;
    int min_component_size = 40;  // px

    void validate() const {
        if (threshold_window < 3 || threshold_window % 2 == 0)
            throw ConfigError("detect: threshold_window must be odd and >= 3");
        if (min_component_size < 1) throw ConfigError("detect: min_component_size must be >= 1");
    }
};

struct DetectScratch {
    std::vector<double> integral;
    std::vector<std::uint8_t> mask;
    std::vector<std::int32_t> stack;
};

/// Adaptive threshold -> 8-connected components -> principal axis per
/// component. Candidates are returned sorted by centroid column.
inline std::vector<LineCandidate> detect_lines(const GroundImage& img, const DetectConfig& cfg,
                                               DetectScratch& scratch) {
    std::vector<LineCandidate> out;
    const int w = img.width, h = img.height;
    if (w <= 0 || h <= 0) return out;

    // Summed-area table with a one-cell border.
    scratch.integral.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    auto integ = [&](int r, int c) -> double& {
        return scratch.integral[static_cast<std::size_t>(r) * (w + 1) + c];
    };
    for (int r = 0; r < h; ++r) {
        double row_sum = 0.0;
        for (int c = 0; c < w; ++c) {
            row_sum += img.at(r, c);
            integ(r + 1, c + 1) = integ(r, c + 1) + row_sum;
        }
    }

    scratch.mask.assign(static_cast<std::size_t>(w) * h, 0);
    const int half = cfg.threshold_window / 2;
    for (int r = 0; r < h; ++r) {
        const int r0 = std::max(0, r - half), r1 = std::min(h - 1, r + half);
        for (int c = 0; c < w; ++c) {
            const int c0 = std::max(0, c - half), c1 = std::min(w - 1, c + half);
            const double sum = integ(r1 + 1, c1 + 1) - integ(r0, c1 + 1) - integ(r1 + 1, c0) + integ(r0, c0);
            const double mean = sum / ((r1 - r0 + 1) * (c1 - c0 + 1));
            if (img.at(r, c) > mean + cfg.threshold_offset)
                scratch.mask[static_cast<std::size_t>(r) * w + c] = 1;
        }
    }

    // Flood fill; mask cells are cleared as they are consumed.
    scratch.stack.clear();
    const double center_col = (w - 1) / 2.0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!scratch.mask[static_cast<std::size_t>(r) * w + c]) continue;
            scratch.stack.push_back(r * w + c);
            scratch.mask[static_cast<std::size_t>(r) * w + c] = 0;
            long n = 0;
            double sr = 0, sc = 0, srr = 0, scc = 0, src = 0;
            while (!scratch.stack.empty()) {
                const int idx = scratch.stack.back();
                scratch.stack.pop_back();
                const int pr = idx / w, pc = idx % w;
                ++n;
                sr += pr; sc += pc;
                srr += static_cast<double>(pr) * pr;
                scc += static_cast<double>(pc) * pc;
                src += static_cast<double>(pr) * pc;
                for (int dr = -1; dr <= 1; ++dr) {
                    const int nr = pr + dr;
                    if (nr < 0 || nr >= h) continue;
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nc = pc + dc;
                        if (nc < 0 || nc >= w) continue;
                        auto& cell = scratch.mask[static_cast<std::size_t>(nr) * w + nc];
                        if (cell) {
                            cell = 0;
                            scratch.stack.push_back(nr * w + nc);
                        }
                    }
                }
            }
            if (n < cfg.min_component_size) continue;

            const double mr = sr / n, mc = sc / n;
            const double crr = srr / n - mr * mr;
            const double ccc = scc / n - mc * mc;
            const double crc = src / n - mr * mc;
            // Principal axis direction (dr, dc), normalized to point up-image.
            const double axis = 0.5 * std::atan2(2.0 * crc, crr - ccc);
            double dr = std::cos(axis), dc = std::sin(axis);
            if (dr > 0.0) { dr = -dr; dc = -dc; }

            LineCandidate cand;
            cand.pixel_count = static_cast<int>(n);
            cand.centroid_col_norm = (mc - center_col) / center_col;
            cand.angle_from_vertical = dr == 0.0 ? kPi / 2.0 : std::atan2(dc, -dr);
            // Extrapolate the axis to the robot row; near-horizontal axes
            // would extrapolate wildly, fall back to the centroid column.
            const double robot_row = h - 0.5;
            double col_at_robot = mc;
            if (std::fabs(cand.angle_from_vertical) < 1.4 && dr != 0.0)
                col_at_robot = mc + (robot_row - mr) * (dc / dr);
            const double y_left = img.origin.y - col_at_robot * img.resolution;
            cand.offset_m = -y_left;
            out.push_back(cand);
        }
    }

    std::sort(out.begin(), out.end(), [](const LineCandidate& a, const LineCandidate& b) {
        return a.centroid_col_norm < b.centroid_col_norm;
    });
    return out;
}

inline std::vector<LineCandidate> detect_lines(const GroundImage& img, const DetectConfig& cfg) {
    DetectScratch scratch;
    return detect_lines(img, cfg, scratch);
}

struct SelectWeights {
    double center_weight = 0.5;    // w_c
    double vertical_weight = 0.5;  // w_v
};

inline double selection_score(const LineCandidate& c, const SelectWeights& w) {
    return w.center_weight * std::fabs(c.centroid_col_norm) +
           w.vertical_weight * std::fabs(c.angle_from_vertical) / (kPi / 2.0);
}

/// Picks the candidate that is most horizontally centered and closest to
/// vertical (lowest combined score). Ties go to the larger component, then
/// to the smaller centroid offset.
inline std::optional<LineCandidate> select_line(const std::vector<LineCandidate>& candidates,
                                                const SelectWeights& w = {}) {
    if (candidates.empty()) return std::nullopt;
    const LineCandidate* best = &candidates.front();
    double best_score = selection_score(*best, w);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const LineCandidate& c = candidates[i];
        const double score = selection_score(c, w);
        bool take = score < best_score;
        if (score == best_score) {
            if (c.pixel_count != best->pixel_count)
                take = c.pixel_count > best->pixel_count;
            else
                take = std::fabs(c.centroid_col_norm) < std::fabs(best->centroid_col_norm);
        }
        if (take) {
            best = &c;
            best_score = score;
        }
    }
    return *best;
}

struct RunnerMeasurement {
    double t = 0.0;
    std::optional<double> distance;  // m, > 0 when present
};

struct RunnerSensorConfig {
    double noise_std = 0.05;  // m
    double drop_probability = 0.05;
    double max_range = 15.0;  // m, beyond which the tag is not seen

    void validate() const {
        if (noise_std < 0.0) throw ConfigError("runner_sensor: noise_std must be >= 0");
        if (drop_probability < 0.0 || drop_probability > 1.0)
            throw ConfigError("runner_sensor: drop_probability must be in [0, 1]");
        if (!(max_range > 0.0)) throw ConfigError("runner_sensor: max_range must be > 0");
    }
};

/// Range measurement to the runner's tag: true distance plus Gaussian noise,
/// dropped entirely with the configured probability.
inline RunnerMeasurement measure_runner(const RobotState& robot, Vec2 runner_position,
                                        const RunnerSensorConfig& cfg, Rng& rng) {
    RunnerMeasurement m;
    m.t = robot.t;
    const double true_dist = (runner_position - robot.position()).norm();
    if (true_dist > cfg.max_range) return m;
    if (cfg.drop_probability > 0.0 && rng.bernoulli(cfg.drop_probability)) return m;
    double d = true_dist;
    if (cfg.noise_std > 0.0) d += rng.gaussian() * cfg.noise_std;
    m.distance = std::max(d, 1e-3);
    return m;
}

/// Binary P5 portable graymap dump, for --dump-images debugging.
inline void write_pgm(const GroundImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (float v : img.intensity) {
        const int byte = static_cast<int>(std::lround(clamp(v, 0.0, 1.0) * 255.0));
        f.put(static_cast<char>(byte));
    }
}

}  // namespace pacerbot
