#pragma once

// Plain, unoptimized, strictly serial versions of the hot kernels. These
// exist to cross-check the production implementations and to anchor the
// benchmark; they trade speed for obviousness.

#include "csc/ksvd.hpp"
#include "csc/patches.hpp"
#include "csc/sparse.hpp"

namespace csc::ref {

// Bicubic sample of img at one continuous coordinate (edge-clamped taps),
// evaluated tap by tap.
double bicubic_at(const Image& img, double y, double x);

Image downsample_naive(const Image& img);
Image upsample_naive(const Image& img, int target_h, int target_w);

// Scatter-style aggregation: accumulate every patch into sum/count planes,
// then divide.
Image aggregate_naive(const PatchMatrix& patches, const PatchGrid& grid);

// Greedy pursuit that refits by a fresh dense least-squares solve each
// step; no factor updates, residual recomputed from scratch.
ColumnCode omp_encode_naive(const Dictionary& dict, const Eigen::VectorXd& y,
                            const StopRule& rule);

// Dominant singular pair via a full symmetric eigendecomposition of the
// Gram matrix (sign fixed the same way as the production update).
struct SingularPair {
  Eigen::VectorXd u;   // unit left vector
  Eigen::VectorXd x;   // E^T u
  double sigma = 0.0;
};
SingularPair top_singular_pair(const Eigen::MatrixXd& E);

}  // namespace csc::ref
