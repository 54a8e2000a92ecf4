#include "csc/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace csc {

Image::Image(int h, int w, double fill) : height(h), width(w) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("image dims must be positive");
  data.assign(static_cast<size_t>(h) * w, fill);
}

void validate(const Image& img) {
  if (img.height <= 0 || img.width <= 0)
    throw std::invalid_argument("image dims must be positive");
  if (img.data.size() != img.pixels())
    throw std::invalid_argument("image buffer size does not match dims");
  for (double v : img.data)
    if (!std::isfinite(v)) throw std::invalid_argument("image holds non-finite values");
}

namespace {

// Catmull-Rom weight (the a = -0.5 cubic).
inline double cubic_weight(double s) {
  s = std::abs(s);
  if (s < 1.0) return ((1.5 * s - 2.5) * s) * s + 1.0;
  if (s < 2.0) return ((-0.5 * s + 2.5) * s - 4.0) * s + 2.0;
  return 0.0;
}

struct Taps {
  int idx[4];
  double w[4];
};

// Tap positions and weights for one output coordinate along an axis of
// length in_n, with edge clamp. x is the continuous source coordinate.
inline Taps make_taps(double x, int in_n) {
  Taps t;
  const int base = static_cast<int>(std::floor(x));
  for (int i = 0; i < 4; ++i) {
    const int p = base - 1 + i;
    t.idx[i] = std::clamp(p, 0, in_n - 1);
    t.w[i] = cubic_weight(x - p);
  }
  return t;
}

// Separable resampler: first vertical, then horizontal. Every output pixel
// depends only on the input, so rows can be processed independently.
Image resample(const Image& in, int out_h, int out_w, double y_of_row(int, int),
               double x_of_col(int, int)) {
  std::vector<Taps> row_taps(out_h), col_taps(out_w);
  for (int r = 0; r < out_h; ++r) row_taps[r] = make_taps(y_of_row(r, in.height), in.height);
  for (int c = 0; c < out_w; ++c) col_taps[c] = make_taps(x_of_col(c, in.width), in.width);

  // vertical pass: out_h x in.width intermediate
  std::vector<double> mid(static_cast<size_t>(out_h) * in.width);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < out_h; ++r) {
    const Taps& t = row_taps[r];
    double* dst = mid.data() + static_cast<size_t>(r) * in.width;
    const double* s0 = in.data.data() + static_cast<size_t>(t.idx[0]) * in.width;
    const double* s1 = in.data.data() + static_cast<size_t>(t.idx[1]) * in.width;
    const double* s2 = in.data.data() + static_cast<size_t>(t.idx[2]) * in.width;
    const double* s3 = in.data.data() + static_cast<size_t>(t.idx[3]) * in.width;
    for (int c = 0; c < in.width; ++c)
      dst[c] = t.w[0] * s0[c] + t.w[1] * s1[c] + t.w[2] * s2[c] + t.w[3] * s3[c];
  }

  Image out(out_h, out_w);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < out_h; ++r) {
    const double* src = mid.data() + static_cast<size_t>(r) * in.width;
    double* dst = out.data.data() + static_cast<size_t>(r) * out_w;
    for (int c = 0; c < out_w; ++c) {
      const Taps& t = col_taps[c];
      dst[c] = t.w[0] * src[t.idx[0]] + t.w[1] * src[t.idx[1]] + t.w[2] * src[t.idx[2]] +
               t.w[3] * src[t.idx[3]];
    }
  }
  return out;
}

double down_coord(int k, int /*in_n*/) { return 2.0 * k + 0.5; }
double up_coord(int k, int /*in_n*/) { return (k + 0.5) * 0.5 - 0.5; }

}  // namespace

Image downsample(const Image& img) {
  validate(img);
  if (img.height < 2 || img.width < 2)
    throw std::invalid_argument("downsample needs at least 2x2");
  const int oh = (img.height + 1) / 2;
  const int ow = (img.width + 1) / 2;
  return resample(img, oh, ow, down_coord, down_coord);
}

Image upsample(const Image& img, int target_h, int target_w) {
  validate(img);
  auto ok = [](int t, int n) { return t == 2 * n || t == 2 * n - 1; };
  if (!ok(target_h, img.height) || !ok(target_w, img.width))
    throw std::invalid_argument("upsample target must be 2n or 2n-1 per axis, got " +
                                std::to_string(target_h) + "x" + std::to_string(target_w));
  return resample(img, target_h, target_w, up_coord, up_coord);
}

Pyramid build_pyramid(const Image& img, int level_count) {
  validate(img);
  if (level_count < 1) throw std::invalid_argument("pyramid needs at least one level");
  Pyramid p;
  p.levels.reserve(level_count);
  p.levels.push_back(img);
  for (int i = 1; i < level_count; ++i) p.levels.push_back(downsample(p.levels.back()));
  return p;
}

double mse(const Image& a, const Image& b) {
  if (!a.same_size(b)) throw std::invalid_argument("mse: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

Image add_gaussian_noise(const Image& img, double sigma, uint64_t seed) {
  validate(img);
  if (sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
  Image out = img;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : out.data) v += dist(rng);
  return out;
}

}  // namespace csc
