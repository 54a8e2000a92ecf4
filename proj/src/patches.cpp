#include "csc/patches.hpp"

#include <algorithm>
#include <stdexcept>

namespace csc {

namespace {

// Step positions 0, s, 2s, ... plus a final start clamped so the window
// ends exactly at the image border; deduplicated.
std::vector<int> axis_starts(int extent, int patch, int stride) {
  std::vector<int> starts;
  for (int p = 0; p + patch <= extent; p += stride) starts.push_back(p);
  const int last = extent - patch;
  if (starts.empty() || starts.back() != last) starts.push_back(last);
  return starts;
}

}  // namespace

PatchGrid make_grid(int image_h, int image_w, int patch, int stride) {
  if (patch <= 0 || stride <= 0) throw std::invalid_argument("patch and stride must be positive");
  if (stride > patch)
    throw std::invalid_argument("stride above the patch side would leave uncovered pixels");
  if (image_h < patch || image_w < patch)
    throw std::invalid_argument("image smaller than patch");
  PatchGrid g;
  g.image_h = image_h;
  g.image_w = image_w;
  g.patch = patch;
  g.stride = stride;
  const auto rows = axis_starts(image_h, patch, stride);
  const auto cols = axis_starts(image_w, patch, stride);
  g.locations.reserve(rows.size() * cols.size());
  for (int i : rows)
    for (int j : cols) g.locations.emplace_back(i, j);
  return g;
}

namespace {

void check_geometry(const Image& img, const PatchGrid& grid) {
  if (img.height != grid.image_h || img.width != grid.image_w)
    throw std::invalid_argument("grid geometry does not match image");
  for (auto [i, j] : grid.locations)
    if (i < 0 || j < 0 || i + grid.patch > grid.image_h || j + grid.patch > grid.image_w)
      throw std::invalid_argument("patch location out of bounds");
}

// Locations grouped by their row coordinate, for per-pixel cover lookups.
// Requires row-major sorted locations (duplicates allowed).
struct RowGroups {
  std::vector<int> row;    // distinct top rows, ascending
  std::vector<int> begin;  // index of first location in group; size rows+1
  std::vector<int> col;    // location columns, in original order
};

RowGroups group_rows(const PatchGrid& grid) {
  RowGroups rg;
  const auto& loc = grid.locations;
  rg.col.resize(loc.size());
  int prev_i = -1, prev_j = -1;
  for (size_t k = 0; k < loc.size(); ++k) {
    const auto [i, j] = loc[k];
    if (k > 0 && (i < prev_i || (i == prev_i && j < prev_j)))
      throw std::invalid_argument("grid locations must be sorted row-major");
    if (i != prev_i) {
      rg.row.push_back(i);
      rg.begin.push_back(static_cast<int>(k));
    }
    rg.col[k] = j;
    prev_i = i;
    prev_j = j;
  }
  rg.begin.push_back(static_cast<int>(loc.size()));
  return rg;
}

}  // namespace

PatchMatrix extract(const Image& img, const PatchGrid& grid) {
  validate(img);
  check_geometry(img, grid);
  const int b = grid.patch;
  PatchMatrix out(b * b, static_cast<Eigen::Index>(grid.count()));
  const int k_total = static_cast<int>(grid.count());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < k_total; ++k) {
    const auto [pi, pj] = grid.locations[k];
    double* col = out.col(k).data();
    for (int cc = 0; cc < b; ++cc)
      for (int rr = 0; rr < b; ++rr) col[cc * b + rr] = img.at(pi + rr, pj + cc);
  }
  return out;
}

namespace {

Image aggregate_impl(const PatchMatrix& patches, const PatchGrid& grid,
                     const std::vector<uint8_t>* accepted) {
  if (patches.rows() != grid.dim() ||
      patches.cols() != static_cast<Eigen::Index>(grid.count()))
    throw std::invalid_argument("patch matrix does not match grid");
  if (accepted && accepted->size() != grid.count())
    throw std::invalid_argument("accepted flags do not match grid");
  const RowGroups rg = group_rows(grid);
  const int b = grid.patch;
  Image out(grid.image_h, grid.image_w);

  // Per output pixel, walk the covering patches in location order. The
  // summation order is therefore identical to a serial scatter pass, so
  // the result does not depend on the thread count.
#pragma omp parallel for schedule(static)
  for (int y = 0; y < grid.image_h; ++y) {
    auto glo = std::lower_bound(rg.row.begin(), rg.row.end(), y - b + 1);
    auto ghi = std::upper_bound(rg.row.begin(), rg.row.end(), y);
    for (int x = 0; x < grid.image_w; ++x) {
      double sum = 0.0;
      int cover = 0;
      for (auto git = glo; git != ghi; ++git) {
        const int g = static_cast<int>(git - rg.row.begin());
        const int i = rg.row[g];
        const auto cb = rg.col.begin() + rg.begin[g];
        const auto ce = rg.col.begin() + rg.begin[g + 1];
        auto klo = std::lower_bound(cb, ce, x - b + 1);
        auto khi = std::upper_bound(cb, ce, x);
        for (auto kit = klo; kit != khi; ++kit) {
          const int k = static_cast<int>(kit - rg.col.begin());
          if (accepted && !(*accepted)[k]) continue;
          const int j = *kit;
          sum += patches((x - j) * b + (y - i), k);
          ++cover;
        }
      }
      out.at(y, x) = cover > 0 ? sum / cover : 0.0;
    }
  }
  return out;
}

}  // namespace

Image aggregate(const PatchMatrix& patches, const PatchGrid& grid) {
  return aggregate_impl(patches, grid, nullptr);
}

Image aggregate(const PatchMatrix& patches, const PatchGrid& grid,
                const std::vector<uint8_t>& accepted) {
  return aggregate_impl(patches, grid, &accepted);
}

}  // namespace csc
