#pragma once

#include <cstdint>
#include <vector>

namespace csc {

// Row-major grayscale raster. Intensities stay real-valued through the whole
// pipeline; [0,255] is the nominal range and quantization happens only when
// a file is written.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, double fill = 0.0);

  double& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
  size_t pixels() const { return static_cast<size_t>(height) * width; }
  bool same_size(const Image& o) const { return height == o.height && width == o.width; }
};

// Resolution ladder; levels[0] is the finest (the input itself), each
// following level is one bicubic halving of the previous (ceil dimensions).
struct Pyramid {
  std::vector<Image> levels;
};

// Throws if dimensions are non-positive, the buffer size disagrees, or any
// value is non-finite.
void validate(const Image& img);

// Bicubic halving: out dims are ceil(in/2), sample positions 2k+0.5 on each
// axis, Catmull-Rom kernel, edge-clamped taps. Input must be at least 2x2.
Image downsample(const Image& img);

// Bicubic doubling toward an explicit target size; target_h must be
// 2*height or 2*height-1 (same for width), which is exactly what is needed
// to invert the ceil-halving above. Sample positions (k+0.5)/2 - 0.5.
Image upsample(const Image& img, int target_h, int target_w);

Pyramid build_pyramid(const Image& img, int level_count);

double mse(const Image& a, const Image& b);

// Peak signal-to-noise ratio against peak 255; +infinity for identical
// inputs. Throws on dimension mismatch.
double psnr(const Image& a, const Image& b);

// Adds i.i.d. N(0, sigma^2) to every pixel. Deterministic for a given seed;
// values are not clamped.
Image add_gaussian_noise(const Image& img, double sigma, uint64_t seed);

}  // namespace csc
