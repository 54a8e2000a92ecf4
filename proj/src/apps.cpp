#include "csc/apps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace csc {

size_t Mask::count_known() const {
  size_t t = 0;
  for (uint8_t v : known) t += v ? 1 : 0;
  return t;
}

Mask full_mask(int h, int w) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("mask dims must be positive");
  Mask m;
  m.height = h;
  m.width = w;
  m.known.assign(static_cast<size_t>(h) * w, 1);
  return m;
}

Mask mask_from_image(const Image& img) {
  validate(img);
  Mask m;
  m.height = img.height;
  m.width = img.width;
  m.known.resize(img.pixels());
  for (size_t i = 0; i < img.data.size(); ++i) m.known[i] = img.data[i] != 0.0 ? 1 : 0;
  return m;
}

Mask downsample_mask(const Mask& m) {
  if (m.height < 2 || m.width < 2) throw std::invalid_argument("mask too small to halve");
  Mask out;
  out.height = (m.height + 1) / 2;
  out.width = (m.width + 1) / 2;
  out.known.assign(static_cast<size_t>(out.height) * out.width, 0);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      uint8_t any = 0;
      for (int dr = 0; dr < 2 && 2 * r + dr < m.height; ++dr)
        for (int dc = 0; dc < 2 && 2 * c + dc < m.width; ++dc)
          any |= m.at(2 * r + dr, 2 * c + dc);
      out.known[static_cast<size_t>(r) * out.width + c] = any ? 1 : 0;
    }
  return out;
}

namespace {

inline double cubic_weight(double s) {
  s = std::abs(s);
  if (s < 1.0) return ((1.5 * s - 2.5) * s) * s + 1.0;
  if (s < 2.0) return ((-0.5 * s + 2.5) * s - 4.0) * s + 2.0;
  return 0.0;
}

// Bicubic halving where every tap also carries a confidence in [0, 1].
// Pixels reconstructed from thin evidence at one level should not count as
// much as densely supported ones at the next, so confidences multiply into
// the kernel weights. The kernel has negative lobes; with uneven confidence
// they can cancel or even dominate the positive center, so the signed
// interpolation is only trusted while the positive mass clearly wins, and a
// convex positive-lobe average takes over otherwise. conf_out reports the
// evidence-backed fraction of the positive kernel mass. With a 0/1
// confidence map and no cancellation this runs the exact arithmetic
// downsample_masked has always had.
Image halve_weighted(const Image& img, const Image& conf, Image* conf_out) {
  const int oh = (img.height + 1) / 2;
  const int ow = (img.width + 1) / 2;
  Image out(oh, ow);
  if (conf_out) *conf_out = Image(oh, ow);

#pragma omp parallel for schedule(static)
  for (int r = 0; r < oh; ++r) {
    const double y = 2.0 * r + 0.5;
    const int by = static_cast<int>(std::floor(y));
    for (int c = 0; c < ow; ++c) {
      const double x = 2.0 * c + 0.5;
      const int bx = static_cast<int>(std::floor(x));
      double wsum = 0.0, vsum = 0.0, mean = 0.0, csum = 0.0;
      double pos = 0.0, posv = 0.0, pos_all = 0.0;
      for (int i = 0; i < 4; ++i) {
        const int py = std::clamp(by - 1 + i, 0, img.height - 1);
        const double wy = cubic_weight(y - (by - 1 + i));
        for (int j = 0; j < 4; ++j) {
          const int px = std::clamp(bx - 1 + j, 0, img.width - 1);
          const double k = wy * cubic_weight(x - (bx - 1 + j));
          const double ci = conf.at(py, px);
          pos_all += std::max(k, 0.0);
          if (ci == 0.0) continue;
          const double w = k * ci;
          wsum += w;
          vsum += w * img.at(py, px);
          mean += ci * img.at(py, px);
          csum += ci;
          pos += std::max(k, 0.0) * ci;
          posv += std::max(k, 0.0) * ci * img.at(py, px);
        }
      }
      double v;
      if (wsum > 0.5 * pos)
        v = vsum / wsum;
      else if (pos > 0.0)
        v = posv / pos;  // lobes cancelled; convex average
      else if (csum > 0.0)
        v = mean / csum;  // evidence only under negative lobes
      else
        v = 0.0;

      // On thin evidence the 4x4 window is one or two copied pixels; pool a
      // wider neighbourhood and fade between the two estimates.
      constexpr double kThinEvidence = 6.0;
      if (csum < kThinEvidence) {
        double gw = 0.0, gv = 0.0;
        for (int dy = -4; dy <= 4; ++dy) {
          const int py = by + dy;
          if (py < 0 || py >= img.height) continue;
          for (int dx = -4; dx <= 4; ++dx) {
            const int px = bx + dx;
            if (px < 0 || px >= img.width) continue;
            const double ci = conf.at(py, px);
            if (ci == 0.0) continue;
            const double d2 = (py - y) * (py - y) + (px - x) * (px - x);
            const double w = ci * std::exp(-d2 / 8.0);
            gw += w;
            gv += w * img.at(py, px);
          }
        }
        if (gw > 0.0) {
          const double a = csum / kThinEvidence;
          v = csum > 0.0 ? a * v + (1.0 - a) * (gv / gw) : gv / gw;
        }
      }
      out.at(r, c) = v;
      if (conf_out) conf_out->at(r, c) = pos_all > 0.0 ? pos / pos_all : 0.0;
    }
  }
  return out;
}

Image conf_from_mask(const Mask& m) {
  Image c(m.height, m.width);
  for (size_t i = 0; i < m.known.size(); ++i) c.data[i] = m.known[i] ? 1.0 : 0.0;
  return c;
}

// Estimate level n of the pyramid straight from the full-resolution known
// pixels: a Gaussian matched to the footprint of n composed halvings,
// normalised over the known taps. Chained halving compounds estimation
// noise level over level when the mask is sparse; pooling the original
// evidence once does not.
Image direct_pooled(const Image& y0, const Mask& m0, int n, int oh, int ow) {
  const double S = std::pow(2.0, n);
  const double off = 0.5 * (S - 1.0);
  const double sig = 0.4 * S;
  const int rad = static_cast<int>(std::ceil(2.5 * sig));
  Image out(oh, ow);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < oh; ++r) {
    const double yc = S * r + off;
    for (int c = 0; c < ow; ++c) {
      const double xc = S * c + off;
      double gw = 0.0, gv = 0.0;
      const int ylo = std::max(0, static_cast<int>(std::floor(yc)) - rad);
      const int yhi = std::min(y0.height - 1, static_cast<int>(std::ceil(yc)) + rad);
      const int xlo = std::max(0, static_cast<int>(std::floor(xc)) - rad);
      const int xhi = std::min(y0.width - 1, static_cast<int>(std::ceil(xc)) + rad);
      for (int py = ylo; py <= yhi; ++py)
        for (int px = xlo; px <= xhi; ++px) {
          if (!m0.at(py, px)) continue;
          const double d2 = (py - yc) * (py - yc) + (px - xc) * (px - xc);
          const double w = std::exp(-d2 / (2.0 * sig * sig));
          gw += w;
          gv += w * y0.at(py, px);
        }
      out.at(r, c) = gw > 0.0 ? gv / gw : 0.0;
    }
  }
  return out;
}

}  // namespace

Image downsample_masked(const Image& img, const Mask& m) {
  validate(img);
  if (img.height != m.height || img.width != m.width)
    throw std::invalid_argument("mask does not match image");
  if (img.height < 2 || img.width < 2) throw std::invalid_argument("image too small to halve");
  return halve_weighted(img, conf_from_mask(m), nullptr);
}

CascadeModel train_cascade(const Image& img, const CascadeConfig& cfg,
                           const std::vector<StopRule>* level_rules) {
  const FirstPassResult fp = first_pass(img, cfg, level_rules);
  return second_pass_train(fp.residuals, cfg);
}

CodingResult code_image(const Image& img, const CascadeModel& model,
                        const std::vector<StopRule>& level_rules) {
  CodingResult res;
  res.codes = encode(img, model, level_rules, &res.reconstruction);
  res.rate.coeffs_per_pixel =
      static_cast<double>(res.codes.total_coefficients()) / img.pixels();
  res.rate.psnr_db = psnr(img, res.reconstruction);
  return res;
}

Image denoise(const Image& noisy, const CascadeConfig& cfg, double sigma, double gain) {
  if (sigma < 0.0 || gain <= 0.0) throw std::invalid_argument("bad noise parameters");
  const int n = cfg.patch * cfg.patch;
  const double eps2 = n * (gain * sigma) * (gain * sigma);
  const StopRule rule = StopRule::both(std::max(1, n / 2), eps2);
  const std::vector<StopRule> rules(cfg.levels, rule);

  CascadeConfig c = cfg;
  c.train.stop = rule;  // pooled training honors the same tolerance
  const CascadeModel model = train_cascade(noisy, c, &rules);

  Image out;
  encode(noisy, model, rules, &out);
  return out;
}

namespace {

std::vector<int> pick_columns(int k, int cap, uint64_t seed) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  if (cap > 0 && k > cap) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

std::vector<uint8_t> extract_mask_flags(const Mask& m, const PatchGrid& grid) {
  const int b = grid.patch;
  std::vector<uint8_t> flags(static_cast<size_t>(b) * b * grid.count());
  for (size_t k = 0; k < grid.count(); ++k) {
    const auto [pi, pj] = grid.locations[k];
    uint8_t* col = flags.data() + k * b * b;
    for (int cc = 0; cc < b; ++cc)
      for (int rr = 0; rr < b; ++rr) col[cc * b + rr] = m.at(pi + rr, pj + cc);
  }
  return flags;
}

double known_pixel_mean(const Image& img, const Mask& m) {
  double sum = 0.0;
  size_t cnt = 0;
  for (size_t i = 0; i < img.data.size(); ++i)
    if (m.known[i]) {
      sum += img.data[i];
      ++cnt;
    }
  return cnt > 0 ? sum / cnt : 0.0;
}

// Pixels covered by at least one accepted patch.
std::vector<uint8_t> covered_pixels(const PatchGrid& grid, const std::vector<uint8_t>& accepted) {
  PatchMatrix ones = PatchMatrix::Ones(grid.dim(), static_cast<Eigen::Index>(grid.count()));
  const Image cov = aggregate(ones, grid, accepted);
  std::vector<uint8_t> out(cov.data.size());
  for (size_t i = 0; i < cov.data.size(); ++i) out[i] = cov.data[i] > 0.0 ? 1 : 0;
  return out;
}

// Shared coarse-to-fine masked coding loop. When `model` is null, a
// dictionary is trained per level on that level's masked residual.
Image inpaint_impl(const Image& corrupted, const Mask& mask, const CascadeConfig& cfg,
                   const std::vector<StopRule>& rules, const CascadeModel* model,
                   int min_known) {
  validate(cfg, corrupted.height, corrupted.width);
  if (mask.height != corrupted.height || mask.width != corrupted.width)
    throw std::invalid_argument("mask does not match image");
  if (static_cast<int>(rules.size()) != cfg.levels)
    throw std::invalid_argument("need one stop rule per level");

  // Mask-aware pyramid: values by confidence-weighted halving (so a coarse
  // pixel rebuilt from one stray tap is discounted at the next level), flags
  // by any-known.
  std::vector<Image> y(cfg.levels);
  std::vector<Mask> km(cfg.levels);
  y[0] = corrupted;
  km[0] = mask;
  Image conf = conf_from_mask(mask);
  for (int n = 1; n < cfg.levels; ++n) {
    // With nothing missing the weighted halving reduces to the plain one up
    // to rounding; use the plain kernel so the two agree exactly.
    const bool all_known = km[n - 1].count_known() == km[n - 1].known.size();
    if (all_known) {
      y[n] = downsample(y[n - 1]);
      conf = Image(y[n].height, y[n].width);
      std::fill(conf.data.begin(), conf.data.end(), 1.0);
    } else {
      Image next_conf;
      y[n] = halve_weighted(y[n - 1], conf, &next_conf);
      // Where the chained value rests on thin evidence, fade it toward the
      // pooled original pixels.
      const Image dir = direct_pooled(corrupted, mask, n, y[n].height, y[n].width);
      for (size_t i = 0; i < y[n].data.size(); ++i) {
        const double a = next_conf.data[i];
        y[n].data[i] = a * y[n].data[i] + (1.0 - a) * dir.data[i];
      }
      conf = std::move(next_conf);
    }
    km[n] = downsample_mask(km[n - 1]);
  }
  // Hygiene: never let unknown intensities leak into arithmetic.
  for (int n = 0; n < cfg.levels; ++n)
    for (size_t i = 0; i < y[n].data.size(); ++i)
      if (!km[n].known[i]) y[n].data[i] = 0.0;

  const Dictionary D0 = dct_dictionary(cfg.patch, cfg.global_atoms);
  Image cur;
  for (int n = cfg.coarsest(); n >= 0; --n) {
    Image up;
    if (n < cfg.coarsest()) up = upsample(cur, y[n].height, y[n].width);

    Image resid = y[n];
    if (n < cfg.coarsest())
      for (size_t i = 0; i < resid.data.size(); ++i)
        resid.data[i] = km[n].known[i] ? resid.data[i] - up.data[i] : 0.0;

    const PatchGrid grid = make_grid(y[n].height, y[n].width, cfg.patch, cfg.stride);
    const PatchMatrix P = extract(resid, grid);
    const std::vector<uint8_t> flags = extract_mask_flags(km[n], grid);

    const Dictionary* dict = nullptr;
    Dictionary trained;
    if (model) {
      dict = &model->global_dict;
    } else {
      const std::vector<int> picked =
          pick_columns(static_cast<int>(grid.count()), cfg.train_subsample, cfg.train.seed + n);
      PatchMatrix Pt(P.rows(), static_cast<Eigen::Index>(picked.size()));
      std::vector<uint8_t> Ft(static_cast<size_t>(P.rows()) * picked.size());
      for (size_t i = 0; i < picked.size(); ++i) {
        Pt.col(static_cast<Eigen::Index>(i)) = P.col(picked[i]);
        std::copy_n(flags.data() + static_cast<size_t>(picked[i]) * P.rows(), P.rows(),
                    Ft.data() + i * P.rows());
      }
      TrainConfig tc = cfg.train;
      tc.stop = rules[n];
      trained = train_masked(Pt, Ft, D0, tc, min_known).dict;
      dict = &trained;
    }

    std::vector<uint8_t> accepted;
    const SparseCode codes = encode_columns_masked(*dict, P, flags, rules[n], min_known, accepted);
    Image approx = aggregate(decode_columns(*dict, codes), grid, accepted);

    if (n < cfg.coarsest()) {
      // patches nothing coded keep the coarser estimate
      const std::vector<uint8_t> cov = covered_pixels(grid, accepted);
      for (size_t i = 0; i < approx.data.size(); ++i)
        approx.data[i] = cov[i] ? approx.data[i] + up.data[i] : up.data[i];
    } else {
      const std::vector<uint8_t> cov = covered_pixels(grid, accepted);
      const double fill = known_pixel_mean(y[n], km[n]);
      for (size_t i = 0; i < approx.data.size(); ++i)
        if (!cov[i]) approx.data[i] = fill;
    }
    cur = std::move(approx);
  }
  return cur;
}

}  // namespace

Image inpaint(const Image& corrupted, const Mask& mask, const CascadeConfig& cfg,
              int min_known) {
  return inpaint_impl(corrupted, mask, cfg, budget_rules(cfg), nullptr, min_known);
}

Image inpaint_with_model(const Image& corrupted, const Mask& mask, const CascadeModel& model,
                         const std::vector<StopRule>& level_rules, int min_known) {
  return inpaint_impl(corrupted, mask, model.config, level_rules, &model, min_known);
}

BaselineResult baseline_ksvd(const Image& img, int patch, int stride, int atoms,
                             const StopRule& stop, const TrainConfig& tc, int subsample) {
  CascadeConfig cfg;
  cfg.levels = 1;
  cfg.patch = patch;
  cfg.stride = stride;
  cfg.global_atoms = atoms;
  cfg.budgets = {stop.has_budget() ? stop.max_atoms : 1};
  cfg.train = tc;
  cfg.train.stop = stop;
  cfg.train_subsample = subsample;

  // At one level the residual ladder is just the image, so the pooled
  // second-pass fit and a single-level cascade are the same computation.
  BaselineResult res;
  res.model = second_pass_train({img}, cfg);
  res.codes = encode(img, res.model, {stop}, &res.reconstruction);
  res.rate.coeffs_per_pixel =
      static_cast<double>(res.codes.total_coefficients()) / img.pixels();
  res.rate.psnr_db = psnr(img, res.reconstruction);
  return res;
}

Image baseline_ksvd_masked(const Image& img, const Mask& mask, int patch, int stride, int atoms,
                           const StopRule& stop, const TrainConfig& tc, int subsample,
                           int min_known) {
  CascadeConfig cfg;
  cfg.levels = 1;
  cfg.patch = patch;
  cfg.stride = stride;
  cfg.global_atoms = atoms;
  cfg.budgets = {stop.has_budget() ? stop.max_atoms : 1};
  cfg.train = tc;
  cfg.train.stop = stop;
  cfg.train_subsample = subsample;
  return inpaint_impl(img, mask, cfg, {stop}, nullptr, min_known);
}

}  // namespace csc
