#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "advbench/rng.hpp"
#include "advbench/tensor.hpp"

namespace advbench {

// Image/label pairs with pixels already normalized into [0,1].
struct Dataset {
    Tensor images;  // [n, H, W, C]
    std::vector<int> labels;
    std::string split_tag;
    int num_classes = 10;

    std::size_t size() const { return labels.size(); }

    Shape image_shape() const {
        const Shape& s = images.shape();
        return {s[1], s[2], s[3]};
    }

    std::int64_t pixels_per_image() const { return numel(image_shape()); }

    // One image as a [1,H,W,C] tensor (copy).
    Tensor image(std::size_t i) const {
        const std::int64_t px = pixels_per_image();
        std::vector<double> d(static_cast<std::size_t>(px));
        std::copy_n(images.data().begin() + static_cast<std::ptrdiff_t>(i * px), px,
                    d.begin());
        Shape s = images.shape();
        s[0] = 1;
        return Tensor::from_data(std::move(s), std::move(d));
    }

    // Batch of images at the given indices, [k,H,W,C].
    Tensor batch(const std::vector<std::size_t>& idx) const {
        const std::int64_t px = pixels_per_image();
        std::vector<double> d(idx.size() * static_cast<std::size_t>(px));
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy_n(images.data().begin() +
                            static_cast<std::ptrdiff_t>(idx[i] * static_cast<std::size_t>(px)),
                        px, d.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(px)));
        Shape s = images.shape();
        s[0] = static_cast<int>(idx.size());
        return Tensor::from_data(std::move(s), std::move(d));
    }

    std::vector<int> batch_labels(const std::vector<std::size_t>& idx) const {
        std::vector<int> out(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
        return out;
    }

    Dataset select(const std::vector<std::size_t>& idx, std::string tag) const {
        Dataset out;
        out.images = batch(idx);
        out.labels = batch_labels(idx);
        out.split_tag = std::move(tag);
        out.num_classes = num_classes;
        return out;
    }

    std::uint64_t fingerprint() const {
        Fnv1a h;
        h.update(images.data().data(), images.data().size() * sizeof(double));
        h.update(labels.data(), labels.size() * sizeof(int));
        return h.digest();
    }
};

// ---- IDX files ---------------------------------------------------------------

namespace idx {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        fail("idx: ", path, ": truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::vector<unsigned char> read_payload(std::istream& in, std::size_t expected,
                                               const std::string& path) {
    std::vector<unsigned char> bytes(expected);
    in.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(expected));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got != expected)
        fail("idx: ", path, ": truncated payload, expected ", expected,
             " bytes but file holds ", got);
    return bytes;
}

}  // namespace idx

// Loads an IDX image/label pair into a Dataset; pixels scaled into [0,1] by
// /255, labels validated against [0, num_classes).
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::string split_tag = "", int num_classes = 10) {
    std::ifstream img_in(images_path, std::ios::binary);
    if (!img_in) fail("idx: cannot open ", images_path);
    const std::uint32_t img_magic = idx::read_be32(img_in, images_path);
    if (img_magic != idx::kImageMagic)
        fail("idx: ", images_path, ": bad magic 0x", hex64(img_magic).substr(8),
             ", expected 0x00000803");
    const std::uint32_t n = idx::read_be32(img_in, images_path);
    const std::uint32_t rows = idx::read_be32(img_in, images_path);
    const std::uint32_t cols = idx::read_be32(img_in, images_path);
    auto img_bytes = idx::read_payload(
        img_in, static_cast<std::size_t>(n) * rows * cols, images_path);

    std::ifstream lbl_in(labels_path, std::ios::binary);
    if (!lbl_in) fail("idx: cannot open ", labels_path);
    const std::uint32_t lbl_magic = idx::read_be32(lbl_in, labels_path);
    if (lbl_magic != idx::kLabelMagic)
        fail("idx: ", labels_path, ": bad magic 0x", hex64(lbl_magic).substr(8),
             ", expected 0x00000801");
    const std::uint32_t ln = idx::read_be32(lbl_in, labels_path);
    if (ln != n)
        fail("idx: label count ", ln, " does not match image count ", n);
    auto lbl_bytes = idx::read_payload(lbl_in, ln, labels_path);

    Dataset ds;
    std::vector<double> pixels(img_bytes.size());
    for (std::size_t i = 0; i < img_bytes.size(); ++i)
        pixels[i] = static_cast<double>(img_bytes[i]) / 255.0;
    ds.images = Tensor::from_data({static_cast<int>(n), static_cast<int>(rows),
                                   static_cast<int>(cols), 1},
                                  std::move(pixels));
    ds.labels.resize(ln);
    for (std::size_t i = 0; i < lbl_bytes.size(); ++i) {
        if (lbl_bytes[i] >= num_classes)
            fail("idx: ", labels_path, ": label ", int(lbl_bytes[i]), " at index ", i,
                 " outside [0,", num_classes - 1, "]");
        ds.labels[i] = lbl_bytes[i];
    }
    ds.split_tag = std::move(split_tag);
    ds.num_classes = num_classes;
    return ds;
}

// Writes the dataset back out as an IDX pair (pixels quantized to u8).
inline void save_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
    const Shape s = ds.images.shape();
    check(s[3] == 1, "idx: only single-channel images can be saved");
    std::ofstream img_out(images_path, std::ios::binary);
    if (!img_out) fail("idx: cannot write ", images_path);
    idx::write_be32(img_out, idx::kImageMagic);
    idx::write_be32(img_out, static_cast<std::uint32_t>(s[0]));
    idx::write_be32(img_out, static_cast<std::uint32_t>(s[1]));
    idx::write_be32(img_out, static_cast<std::uint32_t>(s[2]));
    std::vector<unsigned char> bytes(ds.images.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, ds.images.data()[i]));
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    img_out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));

    std::ofstream lbl_out(labels_path, std::ios::binary);
    if (!lbl_out) fail("idx: cannot write ", labels_path);
    idx::write_be32(lbl_out, idx::kLabelMagic);
    idx::write_be32(lbl_out, static_cast<std::uint32_t>(ds.labels.size()));
    for (int l : ds.labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        lbl_out.write(reinterpret_cast<const char*>(&b), 1);
    }
}

// Uniform sample without replacement, deterministic under seed; original
// relative order is preserved.
inline Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed) {
    check(fraction > 0.0 && fraction <= 1.0, "subsample: fraction must be in (0,1]");
    const std::size_t n = ds.size();
    const std::size_t k = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(n),
                         std::llround(fraction * static_cast<double>(n))));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(seed, 0x73756273u));
    rng.shuffle(idx);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return ds.select(idx, ds.split_tag + format_msg("/sub", fraction, "@", seed));
}

// ---- synthetic digits ---------------------------------------------------------

// Procedural 28x28 digit corpus. Stroke skeletons per digit are rasterized
// with a distance field and randomized affine jitter, stroke width, contrast
// and pixel noise, then lightly blurred. It exists so the full pipeline runs
// in environments without the real IDX corpora; files written via save_idx
// are indistinguishable to the loader.
namespace synth {

using Point = std::array<double, 2>;
using Stroke = std::vector<Point>;

constexpr double kPi = 3.14159265358979323846;

inline std::vector<Stroke> arc(double cx, double cy, double rx, double ry,
                               double a0, double a1, int segs = 10) {
    Stroke s;
    for (int i = 0; i <= segs; ++i) {
        const double a = a0 + (a1 - a0) * i / segs;
        s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
    return {s};
}

inline void append(std::vector<Stroke>& dst, std::vector<Stroke> src) {
    for (auto& s : src) dst.push_back(std::move(s));
}

// Skeletons in a [0,1]^2 box, y growing downward.
inline const std::vector<Stroke>& digit_skeleton(int d) {
    static const std::array<std::vector<Stroke>, 10> all = [] {
        std::array<std::vector<Stroke>, 10> g;
        g[0] = arc(0.5, 0.5, 0.32, 0.42, 0, 2 * kPi, 20);
        g[1] = {Stroke{{0.35, 0.25}, {0.55, 0.08}, {0.55, 0.92}},
                Stroke{{0.35, 0.92}, {0.75, 0.92}}};
        g[2] = [] {
            std::vector<Stroke> s;
            append(s, arc(0.5, 0.3, 0.3, 0.22, -kPi, 0.15 * kPi, 12));
            s.push_back(Stroke{{0.78, 0.40}, {0.22, 0.92}, {0.80, 0.92}});
            return s;
        }();
        g[3] = [] {
            std::vector<Stroke> s;
            append(s, arc(0.45, 0.28, 0.28, 0.20, -0.9 * kPi, 0.5 * kPi, 12));
            append(s, arc(0.45, 0.70, 0.32, 0.24, -0.5 * kPi, 0.9 * kPi, 12));
            return s;
        }();
        g[4] = {Stroke{{0.62, 0.08}, {0.18, 0.62}, {0.85, 0.62}},
                Stroke{{0.62, 0.08}, {0.62, 0.92}}};
        g[5] = [] {
            std::vector<Stroke> s;
            s.push_back(Stroke{{0.75, 0.08}, {0.28, 0.08}, {0.25, 0.47}});
            append(s, arc(0.47, 0.68, 0.3, 0.25, -0.55 * kPi, 0.75 * kPi, 14));
            return s;
        }();
        g[6] = [] {
            std::vector<Stroke> s;
            append(s, arc(0.52, 0.68, 0.28, 0.24, 0, 2 * kPi, 16));
            s.push_back(Stroke{{0.66, 0.10}, {0.34, 0.48}, {0.26, 0.72}});
            return s;
        }();
        g[7] = {Stroke{{0.2, 0.1}, {0.8, 0.1}, {0.42, 0.92}},
                Stroke{{0.30, 0.5}, {0.72, 0.5}}};
        g[8] = [] {
            std::vector<Stroke> s;
            append(s, arc(0.5, 0.28, 0.24, 0.19, 0, 2 * kPi, 16));
            append(s, arc(0.5, 0.71, 0.29, 0.23, 0, 2 * kPi, 16));
            return s;
        }();
        g[9] = [] {
            std::vector<Stroke> s;
            append(s, arc(0.48, 0.32, 0.27, 0.23, 0, 2 * kPi, 16));
            s.push_back(Stroke{{0.74, 0.36}, {0.66, 0.65}, {0.42, 0.92}});
            return s;
        }();
        return g;
    }();
    return all[static_cast<std::size_t>(d)];
}

inline double dist_to_segment(double px, double py, const Point& a, const Point& b) {
    const double vx = b[0] - a[0], vy = b[1] - a[1];
    const double wx = px - a[0], wy = py - a[1];
    const double vv = vx * vx + vy * vy;
    double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::min(1.0, std::max(0.0, t));
    const double dx = px - (a[0] + t * vx), dy = py - (a[1] + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

inline void render_digit(double* out, int digit, Rng& rng) {
    constexpr int N = 28;
    const double angle = rng.uniform(-0.21, 0.21);
    const double scale_x = rng.uniform(0.82, 1.12);
    const double scale_y = rng.uniform(0.82, 1.12);
    const double shear = rng.uniform(-0.15, 0.15);
    const double dx = rng.uniform(-2.2, 2.2);
    const double dy = rng.uniform(-2.2, 2.2);
    const double thickness = rng.uniform(0.85, 1.8);
    const double intensity = rng.uniform(0.78, 1.0);
    const double noise_sd = rng.uniform(0.01, 0.05);

    const double ca = std::cos(angle), sa = std::sin(angle);
    // glyph box of ~20px, centered
    auto to_canvas = [&](const Point& p) -> Point {
        double x = (p[0] - 0.5) * 20.0 * scale_x;
        double y = (p[1] - 0.5) * 22.0 * scale_y;
        x += shear * y;
        const double rx = ca * x - sa * y;
        const double ry = sa * x + ca * y;
        return {rx + 13.5 + dx, ry + 13.5 + dy};
    };

    std::vector<std::pair<Point, Point>> segs;
    for (const auto& stroke : digit_skeleton(digit))
        for (std::size_t i = 0; i + 1 < stroke.size(); ++i)
            segs.emplace_back(to_canvas(stroke[i]), to_canvas(stroke[i + 1]));

    std::array<double, N * N> img{};
    for (int y = 0; y < N; ++y)
        for (int x = 0; x < N; ++x) {
            double dmin = 1e9;
            for (const auto& [a, b] : segs)
                dmin = std::min(dmin, dist_to_segment(x, y, a, b));
            const double v = (thickness + 0.6 - dmin) / 0.9;
            img[static_cast<std::size_t>(y * N + x)] =
                intensity * std::min(1.0, std::max(0.0, v));
        }

    // 3x3 binomial blur + pixel noise
    for (int y = 0; y < N; ++y)
        for (int x = 0; x < N; ++x) {
            double acc = 0.0, wsum = 0.0;
            static const double k[3] = {1.0, 2.0, 1.0};
            for (int oy = -1; oy <= 1; ++oy)
                for (int ox = -1; ox <= 1; ++ox) {
                    const int yy = y + oy, xx = x + ox;
                    if (yy < 0 || yy >= N || xx < 0 || xx >= N) continue;
                    const double w = k[oy + 1] * k[ox + 1];
                    acc += w * img[static_cast<std::size_t>(yy * N + xx)];
                    wsum += w;
                }
            double v = acc / wsum + noise_sd * rng.normal();
            out[y * N + x] = std::min(1.0, std::max(0.0, v));
        }
}

}  // namespace synth

inline Dataset make_synthetic_digits(int n, std::uint64_t seed,
                                     std::string split_tag = "synthetic") {
    check(n > 0, "make_synthetic_digits: n must be positive");
    Dataset ds;
    std::vector<double> pixels(static_cast<std::size_t>(n) * 28 * 28);
    ds.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, 0x64696769u, static_cast<std::uint64_t>(i)));
        const int digit = static_cast<int>(rng.uniform_index(10));
        ds.labels[static_cast<std::size_t>(i)] = digit;
        synth::render_digit(pixels.data() + static_cast<std::size_t>(i) * 28 * 28,
                            digit, rng);
    }
    ds.images = Tensor::from_data({n, 28, 28, 1}, std::move(pixels));
    ds.split_tag = std::move(split_tag);
    ds.num_classes = 10;
    return ds;
}

}  // namespace advbench
