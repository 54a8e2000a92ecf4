#pragma once

#include "csc/cascade.hpp"

namespace csc {

struct RatePoint {
  double coeffs_per_pixel = 0.0;
  double psnr_db = 0.0;
};

// Known-pixel flags, 1 = observed.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> known;

  uint8_t at(int r, int c) const { return known[static_cast<size_t>(r) * width + c]; }
  size_t count_known() const;
};

Mask full_mask(int h, int w);
Mask mask_from_image(const Image& img);  // nonzero pixel = known

// Halved mask: a coarse pixel is known when any of the up to 2x2 fine
// pixels under it is known.
Mask downsample_mask(const Mask& m);

// Mask-weighted bicubic halving: unknown pixels carry no weight; windows
// with no known tap fall back to the plain mean of known pixels under the
// window (0 if there are none — the coarse mask marks those unknown).
Image downsample_masked(const Image& img, const Mask& m);

// First-pass + pooled training in one call.
CascadeModel train_cascade(const Image& img, const CascadeConfig& cfg,
                           const std::vector<StopRule>* level_rules = nullptr);

struct CodingResult {
  LayerCodes codes;
  Image reconstruction;
  RatePoint rate;
};

CodingResult code_image(const Image& img, const CascadeModel& model,
                        const std::vector<StopRule>& level_rules);

// Tolerance-driven cascade restoration: trains on the noisy image itself
// and codes every level with Both(patch^2 / 2, patch^2 * (gain * sigma)^2).
Image denoise(const Image& noisy, const CascadeConfig& cfg, double sigma, double gain = 1.15);

// Fills unknown pixels by coding only against known ones, coarse to fine:
// each level trains a masked dictionary on its residual, skipped patches
// leave the upsampled coarser estimate in place. Self-trained variant and
// a variant riding a pretrained global dictionary.
Image inpaint(const Image& corrupted, const Mask& mask, const CascadeConfig& cfg,
              int min_known = 4);
Image inpaint_with_model(const Image& corrupted, const Mask& mask, const CascadeModel& model,
                         const std::vector<StopRule>& level_rules, int min_known = 4);

// Single-scale patch coding (train + encode + aggregate on the image
// itself). Runs the exact one-level cascade path, so its outputs are
// bit-identical to a levels=1 cascade with the same parameters.
struct BaselineResult {
  CascadeModel model;
  LayerCodes codes;
  Image reconstruction;
  RatePoint rate;
};

BaselineResult baseline_ksvd(const Image& img, int patch, int stride, int atoms,
                             const StopRule& stop, const TrainConfig& tc, int subsample = 40000);

// Masked single-scale variant for inpainting comparisons. Pixels no
// accepted patch covers take the mean of the known pixels.
Image baseline_ksvd_masked(const Image& img, const Mask& mask, int patch, int stride, int atoms,
                           const StopRule& stop, const TrainConfig& tc, int subsample = 40000,
                           int min_known = 4);

}  // namespace csc
