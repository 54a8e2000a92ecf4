#pragma once

#include <utility>
#include <vector>

#include "csc/ksvd.hpp"

namespace csc {

// Geometry and training knobs for the multi-level codec. Level 0 is the
// finest; budgets[n] is the per-patch coefficient budget at level n.
struct CascadeConfig {
  int levels = 4;
  int patch = 8;
  int stride = 7;
  std::vector<int> budgets;       // one per level; defaults to 4 each
  TrainConfig train;
  int global_atoms = 256;
  int train_subsample = 40000;    // cap on patches per training run; 0 = all

  int coarsest() const { return levels - 1; }
};

// Throws unless the config is self-consistent and the coarsest pyramid
// level of an h x w image still fits one patch.
void validate(const CascadeConfig& cfg, int image_h, int image_w);

// Per-level budget rules (index = level).
std::vector<StopRule> budget_rules(const CascadeConfig& cfg);

// Everything the residual-generation pass produces: per-level dictionaries
// trained on that level's residual, the residual images themselves, and
// the running reconstructions.
struct FirstPassResult {
  Pyramid pyramid;
  std::vector<Dictionary> level_dicts;   // [n]
  std::vector<Image> residuals;          // [n]; at the coarsest level this is the image itself
  std::vector<Image> reconstructions;    // [n]
};

// Coarse-to-fine: at each level, code the residual against a dictionary
// trained on it, aggregate, and add the upsampled coarser reconstruction.
// level_rules overrides the per-level stop rules (default: the budgets).
FirstPassResult first_pass(const Image& img, const CascadeConfig& cfg,
                           const std::vector<StopRule>* level_rules = nullptr);

struct CascadeModel {
  CascadeConfig config;
  Dictionary global_dict;
  std::vector<std::pair<int, int>> level_dims;  // [n] = (h, w)
  size_t training_patches = 0;                  // pooled set size actually trained on
};

// Pools residual patches from every level (coarsest first) and fits one
// dictionary to all of them; training sparsity is the largest per-level
// budget unless cfg.train.stop carries a tolerance. `residual_sets` holds
// one first-pass residual list per training image; dims are recorded from
// the first.
CascadeModel second_pass_train(const std::vector<Image>& residuals, const CascadeConfig& cfg);
CascadeModel second_pass_train_multi(const std::vector<std::vector<Image>>& residual_sets,
                                     const CascadeConfig& cfg);

struct LevelCode {
  SparseCode codes;
  PatchGrid grid;
};

// Per-level codes, stored coarsest first.
struct LayerCodes {
  std::vector<LevelCode> levels;
  size_t total_coefficients() const;
};

// Production coding: walk the pyramid coarsest to finest, at each level
// coding the residual between that level and the upsampled running
// estimate against the global dictionary. The image may differ in size
// from the training image. If final_estimate is non-null it receives the
// full-resolution reconstruction (identical to decode of the result).
LayerCodes encode(const Image& img, const CascadeModel& model,
                  const std::vector<StopRule>& level_rules, Image* final_estimate = nullptr);

Image decode(const LayerCodes& codes, const CascadeModel& model);

}  // namespace csc
