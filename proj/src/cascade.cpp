#include "csc/cascade.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace csc {

namespace {

std::vector<int> effective_budgets(const CascadeConfig& cfg) {
  if (cfg.budgets.empty()) return std::vector<int>(cfg.levels, 4);
  return cfg.budgets;
}

std::pair<int, int> level_size(int h, int w, int level) {
  for (int i = 0; i < level; ++i) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  return {h, w};
}

// Seeded uniform subsample of the columns of Y (keeps relative order).
PatchMatrix subsample_columns(const PatchMatrix& Y, int cap, uint64_t seed) {
  const int k = static_cast<int>(Y.cols());
  if (cap <= 0 || k <= cap) return Y;
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  PatchMatrix out(Y.rows(), cap);
  for (int i = 0; i < cap; ++i) out.col(i) = Y.col(idx[i]);
  return out;
}

}  // namespace

void validate(const CascadeConfig& cfg, int image_h, int image_w) {
  if (cfg.levels < 1) throw std::invalid_argument("need at least one level");
  if (cfg.patch < 2) throw std::invalid_argument("patch side must be at least 2");
  if (cfg.stride < 1) throw std::invalid_argument("stride must be positive");
  if (!cfg.budgets.empty() && static_cast<int>(cfg.budgets.size()) != cfg.levels)
    throw std::invalid_argument("budget list length must equal level count");
  for (int t : effective_budgets(cfg))
    if (t < 1) throw std::invalid_argument("budgets must be at least 1");
  if (cfg.global_atoms < cfg.patch * cfg.patch)
    throw std::invalid_argument("dictionary must be at least complete");
  const auto [ch, cw] = level_size(image_h, image_w, cfg.coarsest());
  if (ch < cfg.patch || cw < cfg.patch)
    throw std::invalid_argument("coarsest level " + std::to_string(ch) + "x" +
                                std::to_string(cw) + " is smaller than one patch");
}

std::vector<StopRule> budget_rules(const CascadeConfig& cfg) {
  std::vector<StopRule> rules;
  for (int t : effective_budgets(cfg)) rules.push_back(StopRule::budget(t));
  return rules;
}

FirstPassResult first_pass(const Image& img, const CascadeConfig& cfg,
                           const std::vector<StopRule>* level_rules) {
  validate(cfg, img.height, img.width);
  const std::vector<StopRule> rules = level_rules ? *level_rules : budget_rules(cfg);
  if (static_cast<int>(rules.size()) != cfg.levels)
    throw std::invalid_argument("need one stop rule per level");

  FirstPassResult res;
  res.pyramid = build_pyramid(img, cfg.levels);
  res.level_dicts.resize(cfg.levels);
  res.residuals.resize(cfg.levels);
  res.reconstructions.resize(cfg.levels);

  const Dictionary D0 = dct_dictionary(cfg.patch, cfg.global_atoms);
  for (int n = cfg.coarsest(); n >= 0; --n) {
    const Image& yn = res.pyramid.levels[n];
    Image up;
    if (n < cfg.coarsest())
      up = upsample(res.reconstructions[n + 1], yn.height, yn.width);

    Image resid = yn;
    if (n < cfg.coarsest())
      for (size_t i = 0; i < resid.data.size(); ++i) resid.data[i] -= up.data[i];
    res.residuals[n] = resid;

    const PatchGrid grid = make_grid(yn.height, yn.width, cfg.patch, cfg.stride);
    const PatchMatrix P = extract(resid, grid);

    TrainConfig tc = cfg.train;
    tc.stop = rules[n];
    TrainResult tr =
        train(subsample_columns(P, cfg.train_subsample, cfg.train.seed + n), D0, tc);
    res.level_dicts[n] = tr.dict;

    const SparseCode codes = encode_columns(res.level_dicts[n], P, rules[n]);
    Image approx = aggregate(decode_columns(res.level_dicts[n], codes), grid);
    if (n < cfg.coarsest())
      for (size_t i = 0; i < approx.data.size(); ++i) approx.data[i] += up.data[i];
    res.reconstructions[n] = std::move(approx);
  }
  return res;
}

CascadeModel second_pass_train_multi(const std::vector<std::vector<Image>>& residual_sets,
                                     const CascadeConfig& cfg) {
  if (residual_sets.empty()) throw std::invalid_argument("no residuals to train on");
  for (const auto& set : residual_sets)
    if (static_cast<int>(set.size()) != cfg.levels)
      throw std::invalid_argument("residual set does not match level count");

  // Pool patches coarsest level first within each image, images in order.
  size_t pooled = 0;
  std::vector<PatchMatrix> parts;
  for (const auto& set : residual_sets) {
    for (int n = cfg.levels - 1; n >= 0; --n) {
      const Image& r = set[n];
      const PatchGrid grid = make_grid(r.height, r.width, cfg.patch, cfg.stride);
      parts.push_back(extract(r, grid));
      pooled += parts.back().cols();
    }
  }
  PatchMatrix Y(cfg.patch * cfg.patch, static_cast<Eigen::Index>(pooled));
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    Y.middleCols(at, p.cols()) = p;
    at += p.cols();
  }

  const PatchMatrix Ytrain = subsample_columns(Y, cfg.train_subsample, cfg.train.seed);
  // The pooled set mixes levels, so unless the caller asked for a
  // tolerance-driven fit, train at the loosest per-level budget.
  TrainConfig tc = cfg.train;
  if (!tc.stop.has_tolerance()) {
    const std::vector<int> budgets = effective_budgets(cfg);
    tc.stop = StopRule::budget(*std::max_element(budgets.begin(), budgets.end()));
  }
  TrainResult tr = train(Ytrain, dct_dictionary(cfg.patch, cfg.global_atoms), tc);

  CascadeModel model;
  model.config = cfg;
  model.global_dict = std::move(tr.dict);
  model.training_patches = static_cast<size_t>(Ytrain.cols());
  const Image& finest = residual_sets.front()[0];
  for (int n = 0; n < cfg.levels; ++n)
    model.level_dims.push_back(level_size(finest.height, finest.width, n));
  return model;
}

CascadeModel second_pass_train(const std::vector<Image>& residuals, const CascadeConfig& cfg) {
  return second_pass_train_multi({residuals}, cfg);
}

size_t LayerCodes::total_coefficients() const {
  size_t t = 0;
  for (const auto& lc : levels) t += csc::total_coefficients(lc.codes);
  return t;
}

LayerCodes encode(const Image& img, const CascadeModel& model,
                  const std::vector<StopRule>& level_rules, Image* final_estimate) {
  const CascadeConfig& cfg = model.config;
  validate(cfg, img.height, img.width);
  if (static_cast<int>(level_rules.size()) != cfg.levels)
    throw std::invalid_argument("need one stop rule per level");

  const Pyramid pyr = build_pyramid(img, cfg.levels);
  LayerCodes out;
  out.levels.resize(cfg.levels);

  Image cur;
  for (int n = cfg.coarsest(); n >= 0; --n) {
    const Image& yn = pyr.levels[n];
    Image up;
    if (n < cfg.coarsest()) up = upsample(cur, yn.height, yn.width);

    Image resid = yn;
    if (n < cfg.coarsest())
      for (size_t i = 0; i < resid.data.size(); ++i) resid.data[i] -= up.data[i];

    const PatchGrid grid = make_grid(yn.height, yn.width, cfg.patch, cfg.stride);
    const PatchMatrix P = extract(resid, grid);
    SparseCode codes = encode_columns(model.global_dict, P, level_rules[n]);

    Image approx = aggregate(decode_columns(model.global_dict, codes), grid);
    if (n < cfg.coarsest())
      for (size_t i = 0; i < approx.data.size(); ++i) approx.data[i] += up.data[i];
    cur = std::move(approx);

    LevelCode& lc = out.levels[cfg.coarsest() - n];  // store coarsest first
    lc.codes = std::move(codes);
    lc.grid = grid;
  }
  if (final_estimate) *final_estimate = std::move(cur);
  return out;
}

Image decode(const LayerCodes& codes, const CascadeModel& model) {
  const CascadeConfig& cfg = model.config;
  if (static_cast<int>(codes.levels.size()) != cfg.levels)
    throw std::invalid_argument("code level count does not match model");

  Image cur;
  for (int i = 0; i < cfg.levels; ++i) {
    const LevelCode& lc = codes.levels[i];
    if (lc.grid.patch != cfg.patch)
      throw std::invalid_argument("code grid patch size does not match model");
    Image approx = aggregate(decode_columns(model.global_dict, lc.codes), lc.grid);
    if (i > 0) {
      const Image up = upsample(cur, lc.grid.image_h, lc.grid.image_w);
      for (size_t p = 0; p < approx.data.size(); ++p) approx.data[p] += up.data[p];
    }
    cur = std::move(approx);
  }
  return cur;
}

}  // namespace csc
