#include <cmath>
#include <random>

#include "csc/apps.hpp"
#include "csc/io.hpp"
#include "doctest.h"

using namespace csc;

namespace {

Image crop(const Image& src, int r0, int c0, int h, int w) {
  Image out;
  out.height = h;
  out.width = w;
  out.data.resize(static_cast<size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.at(r, c) = src.at(r0 + r, c0 + c);
  return out;
}

const Image& test_photo() {
  static const Image img = [] {
    const Image full = load_pgm(std::string(TEST_DATA_DIR) + "/camera.pgm");
    return crop(full, 128, 128, 128, 128);
  }();
  return img;
}

Image smooth_waves(int h, int w) {
  Image img(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      img.at(r, c) = 127.0 + 60.0 * std::sin(0.07 * r) * std::cos(0.05 * c) + 0.3 * c;
  return img;
}

Mask random_mask(int h, int w, double known_fraction, uint64_t seed) {
  Mask m;
  m.height = h;
  m.width = w;
  m.known.resize(static_cast<size_t>(h) * w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : m.known) v = u(rng) < known_fraction ? 1 : 0;
  return m;
}

double max_abs_diff(const Image& a, const Image& b) {
  REQUIRE(a.same_size(b));
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace

TEST_CASE("mask plumbing") {
  Mask m = full_mask(4, 6);
  CHECK(m.count_known() == 24);

  Image img(2, 3);
  img.data = {0.0, 5.0, 0.0, 1.0, 0.0, 2.0};
  m = mask_from_image(img);
  CHECK(m.count_known() == 3);
  CHECK(m.at(0, 1) == 1);
  CHECK(m.at(0, 0) == 0);

  SUBCASE("halving keeps a coarse pixel when any fine pixel under it is known") {
    Mask f;
    f.height = 3;
    f.width = 3;
    f.known = {0, 0, 0,
               0, 1, 0,
               0, 0, 1};
    const Mask c = downsample_mask(f);
    REQUIRE(c.height == 2);
    REQUIRE(c.width == 2);
    CHECK(c.at(0, 0) == 1);  // fine (1,1) sits under it
    CHECK(c.at(0, 1) == 0);
    CHECK(c.at(1, 0) == 0);
    CHECK(c.at(1, 1) == 1);  // fine (2,2)
  }
}

TEST_CASE("masked halving matches the plain one when everything is known") {
  const Image img = crop(test_photo(), 0, 0, 37, 52);
  const Image plain = downsample(img);
  const Image masked = downsample_masked(img, full_mask(37, 52));
  CHECK(max_abs_diff(plain, masked) <= 1e-9);
}

TEST_CASE("masked halving never reads unknown pixels") {
  const int h = 33, w = 29;
  const Image base = smooth_waves(h, w);
  const Mask m = random_mask(h, w, 0.6, 7);

  Image a = base, b = base;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (!m.at(r, c)) {
        a.at(r, c) = 1e9;
        b.at(r, c) = -3e8;
      }
  const Image da = downsample_masked(a, m);
  const Image db = downsample_masked(b, m);
  CHECK(max_abs_diff(da, db) == 0.0);

  SUBCASE("a fully unknown image halves to zero") {
    Mask none = m;
    std::fill(none.known.begin(), none.known.end(), 0);
    const Image z = downsample_masked(a, none);
    for (double v : z.data) CHECK(v == 0.0);
  }

  SUBCASE("interpolation from known neighbours is sensible on smooth content") {
    const Image approx = downsample_masked(base, m);
    const Image exact = downsample(base);
    CHECK(psnr(exact, approx) > 35.0);
  }
}

TEST_CASE("rate accounting is consistent") {
  CascadeConfig cfg;
  cfg.levels = 3;
  cfg.patch = 8;
  cfg.stride = 4;
  cfg.budgets = {2, 3, 4};
  cfg.global_atoms = 64;
  cfg.train.iterations = 4;

  const CascadeModel model = train_cascade(test_photo(), cfg);
  const CodingResult res = code_image(test_photo(), model, budget_rules(cfg));

  CHECK(res.rate.coeffs_per_pixel ==
        static_cast<double>(res.codes.total_coefficients()) / test_photo().pixels());
  CHECK(res.rate.psnr_db == psnr(test_photo(), res.reconstruction));
  CHECK(res.rate.psnr_db > 20.0);
  CHECK(res.rate.coeffs_per_pixel > 0.0);
}

TEST_CASE("single-scale coding is exactly the one-level cascade") {
  const Image& img = test_photo();
  const StopRule stop = StopRule::budget(3);

  TrainConfig tc;
  tc.iterations = 3;
  tc.seed = 21;

  const BaselineResult base = baseline_ksvd(img, 8, 6, 64, stop, tc);

  CascadeConfig cfg;
  cfg.levels = 1;
  cfg.patch = 8;
  cfg.stride = 6;
  cfg.budgets = {3};
  cfg.global_atoms = 64;
  cfg.train = tc;
  cfg.train.stop = stop;
  const CascadeModel model = train_cascade(img, cfg);
  const CodingResult res = code_image(img, model, budget_rules(cfg));

  CHECK((base.model.global_dict.atoms - model.global_dict.atoms).cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_abs_diff(base.reconstruction, res.reconstruction) == 0.0);
  CHECK(base.codes.total_coefficients() == res.codes.total_coefficients());
  REQUIRE(base.codes.levels.size() == 1);
  REQUIRE(base.codes.levels[0].codes.columns == res.codes.levels[0].codes.columns);
}

TEST_CASE("overwhelming noise tolerance codes everything as zero") {
  CascadeConfig cfg;
  cfg.levels = 2;
  cfg.patch = 8;
  cfg.stride = 4;
  cfg.global_atoms = 64;
  cfg.train.iterations = 2;

  const Image out = denoise(test_photo(), cfg, 1e6);
  for (double v : out.data) CHECK(v == 0.0);

  CHECK_THROWS(denoise(test_photo(), cfg, -1.0));
  CHECK_THROWS(denoise(test_photo(), cfg, 10.0, 0.0));
}

TEST_CASE("denoising recovers most of the lost fidelity") {
  const Image& clean = test_photo();
  const Image noisy = add_gaussian_noise(clean, 25.0, 99);

  CascadeConfig cfg;
  cfg.levels = 3;
  cfg.patch = 8;
  cfg.stride = 2;
  cfg.global_atoms = 256;
  cfg.train.iterations = 8;
  cfg.train.seed = 5;

  const Image restored = denoise(noisy, cfg, 25.0);
  const double before = psnr(clean, noisy);
  const double after = psnr(clean, restored);
  CHECK(after > before + 3.0);

  SUBCASE("and is deterministic") {
    const Image again = denoise(noisy, cfg, 25.0);
    CHECK(max_abs_diff(restored, again) == 0.0);
  }
}

TEST_CASE("inpainting never reads the missing pixels") {
  const int h = 64, w = 64;
  const Image base = smooth_waves(h, w);
  const Mask m = random_mask(h, w, 0.55, 3);

  CascadeConfig cfg;
  cfg.levels = 2;
  cfg.patch = 8;
  cfg.stride = 3;
  cfg.budgets = {3, 3};
  cfg.global_atoms = 64;
  cfg.train.iterations = 3;

  Image a = base, b = base;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (!m.at(r, c)) {
        a.at(r, c) = 999.0;
        b.at(r, c) = -555.0;
      }
  const Image fa = inpaint(a, m, cfg);
  const Image fb = inpaint(b, m, cfg);
  CHECK(max_abs_diff(fa, fb) == 0.0);
}

TEST_CASE("inpainting restores smooth content from scattered samples") {
  const int h = 96, w = 96;
  const Image base = smooth_waves(h, w);
  const Mask m = random_mask(h, w, 0.5, 17);

  Image holed = base;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (!m.at(r, c)) holed.at(r, c) = 0.0;

  CascadeConfig cfg;
  cfg.levels = 2;
  cfg.patch = 8;
  cfg.stride = 2;
  cfg.budgets = {4, 4};
  cfg.global_atoms = 64;
  cfg.train.iterations = 6;

  const Image filled = inpaint(holed, m, cfg);
  CHECK(psnr(base, filled) > 28.0);

  // the holes specifically must be repaired, not just the known pixels kept
  double hole_err = 0.0;
  size_t holes = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (!m.at(r, c)) {
        const double d = filled.at(r, c) - base.at(r, c);
        hole_err += d * d;
        ++holes;
      }
  const double hole_psnr = 10.0 * std::log10(255.0 * 255.0 / (hole_err / holes));
  CHECK(hole_psnr > 24.0);
}

TEST_CASE("model-driven inpainting with a full mask is just coding") {
  CascadeConfig cfg;
  cfg.levels = 2;
  cfg.patch = 8;
  cfg.stride = 4;
  cfg.budgets = {3, 3};
  cfg.global_atoms = 64;
  cfg.train.iterations = 3;

  const Image& img = test_photo();
  const CascadeModel model = train_cascade(img, cfg);
  const CodingResult coded = code_image(img, model, budget_rules(cfg));
  const Image filled = inpaint_with_model(img, full_mask(img.height, img.width), model,
                                          budget_rules(cfg));
  REQUIRE(filled.data.size() == coded.reconstruction.data.size());
  for (size_t i = 0; i < filled.data.size(); ++i)
    REQUIRE(filled.data[i] == coded.reconstruction.data[i]);
}

TEST_CASE("inpainting stays stable at extreme missingness") {
  const int h = 128, w = 128;
  const Image base = smooth_waves(h, w);
  const Mask m = random_mask(h, w, 0.1, 5);

  CascadeConfig cfg;
  cfg.levels = 3;
  cfg.patch = 8;
  cfg.stride = 2;
  cfg.budgets = {2, 2, 2};
  cfg.global_atoms = 64;
  cfg.train.iterations = 5;
  cfg.train.seed = 7;

  auto corrupt = [&](double sentinel) {
    Image img = base;
    for (size_t i = 0; i < img.data.size(); ++i)
      if (!m.known[i]) img.data[i] = sentinel;
    return img;
  };
  const Image filled = inpaint(corrupt(-1234.5), m, cfg);

  // the estimate must neither leak the sentinel nor blow up: with nine in
  // ten pixels gone every value is synthesized from thin evidence
  for (double v : filled.data) {
    CHECK(v > -100.0);
    CHECK(v < 400.0);
  }
  CHECK(psnr(base, filled) > 18.0);

  // and the stored intensities behind the mask must not matter at all
  const Image filled2 = inpaint(corrupt(7e8), m, cfg);
  CHECK(max_abs_diff(filled, filled2) == 0.0);
}

TEST_CASE("masked single-scale coding fills holes too") {
  const int h = 64, w = 64;
  const Image base = smooth_waves(h, w);
  const Mask m = random_mask(h, w, 0.5, 29);
  Image holed = base;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (!m.at(r, c)) holed.at(r, c) = 0.0;

  TrainConfig tc;
  tc.iterations = 4;
  const Image filled = baseline_ksvd_masked(holed, m, 8, 3, 64, StopRule::budget(3), tc);
  CHECK(psnr(base, filled) > 20.0);
}
