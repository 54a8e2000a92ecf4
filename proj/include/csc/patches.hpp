#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "csc/image.hpp"

namespace csc {

// Square sliding-window layout over an image. Locations are top-left
// corners, sorted row-major. make_grid walks in steps of `stride` and
// appends a final clamped position per axis so the last row/column of
// pixels is always covered.
struct PatchGrid {
  int image_h = 0;
  int image_w = 0;
  int patch = 0;   // side length b
  int stride = 0;
  std::vector<std::pair<int, int>> locations;

  int dim() const { return patch * patch; }
  size_t count() const { return locations.size(); }
};

PatchGrid make_grid(int image_h, int image_w, int patch, int stride);

// One patch per column, pixels flattened column-by-column within the patch
// (patch [[1,2],[3,4]] becomes the column 1,3,2,4).
using PatchMatrix = Eigen::MatrixXd;

PatchMatrix extract(const Image& img, const PatchGrid& grid);

// Per-pixel arithmetic mean over every patch covering that pixel. Grids
// from make_grid cover every pixel at least once; for hand-built grids a
// pixel with no cover comes back 0.
Image aggregate(const PatchMatrix& patches, const PatchGrid& grid);

// Same, but patches with accepted[k] == 0 contribute to neither sum nor
// count (used when some patches were skipped during coding).
Image aggregate(const PatchMatrix& patches, const PatchGrid& grid,
                const std::vector<uint8_t>& accepted);

}  // namespace csc
