#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csc::ref {

namespace {

double cubic_weight(double s) {
  s = std::abs(s);
  if (s < 1.0) return ((1.5 * s - 2.5) * s) * s + 1.0;
  if (s < 2.0) return ((-0.5 * s + 2.5) * s - 4.0) * s + 2.0;
  return 0.0;
}

}  // namespace

double bicubic_at(const Image& img, double y, double x) {
  const int by = static_cast<int>(std::floor(y));
  const int bx = static_cast<int>(std::floor(x));
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    const int py = std::clamp(by - 1 + i, 0, img.height - 1);
    const double wy = cubic_weight(y - (by - 1 + i));
    double row = 0.0;
    for (int j = 0; j < 4; ++j) {
      const int px = std::clamp(bx - 1 + j, 0, img.width - 1);
      row += cubic_weight(x - (bx - 1 + j)) * img.at(py, px);
    }
    acc += wy * row;
  }
  return acc;
}

Image downsample_naive(const Image& img) {
  if (img.height < 2 || img.width < 2)
    throw std::invalid_argument("downsample needs at least 2x2");
  Image out((img.height + 1) / 2, (img.width + 1) / 2);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c)
      out.at(r, c) = bicubic_at(img, 2.0 * r + 0.5, 2.0 * c + 0.5);
  return out;
}

Image upsample_naive(const Image& img, int target_h, int target_w) {
  auto ok = [](int t, int n) { return t == 2 * n || t == 2 * n - 1; };
  if (!ok(target_h, img.height) || !ok(target_w, img.width))
    throw std::invalid_argument("upsample target must be 2n or 2n-1 per axis");
  Image out(target_h, target_w);
  for (int r = 0; r < target_h; ++r)
    for (int c = 0; c < target_w; ++c)
      out.at(r, c) = bicubic_at(img, (r + 0.5) * 0.5 - 0.5, (c + 0.5) * 0.5 - 0.5);
  return out;
}

Image aggregate_naive(const PatchMatrix& patches, const PatchGrid& grid) {
  if (patches.rows() != grid.dim() ||
      patches.cols() != static_cast<Eigen::Index>(grid.count()))
    throw std::invalid_argument("patch matrix does not match grid");
  const int b = grid.patch;
  Image sum(grid.image_h, grid.image_w, 0.0);
  std::vector<int> count(sum.pixels(), 0);
  for (size_t k = 0; k < grid.count(); ++k) {
    const auto [pi, pj] = grid.locations[k];
    for (int cc = 0; cc < b; ++cc)
      for (int rr = 0; rr < b; ++rr) {
        sum.at(pi + rr, pj + cc) += patches(cc * b + rr, static_cast<Eigen::Index>(k));
        ++count[static_cast<size_t>(pi + rr) * grid.image_w + pj + cc];
      }
  }
  for (size_t i = 0; i < sum.data.size(); ++i)
    if (count[i] > 0) sum.data[i] /= count[i];
  return sum;
}

ColumnCode omp_encode_naive(const Dictionary& dict, const Eigen::VectorXd& y,
                            const StopRule& rule) {
  const int n = dict.dim();
  const int m = dict.size();
  int cap = std::min(n, m);
  if (rule.has_budget()) cap = std::min(cap, rule.max_atoms);

  ColumnCode out;
  if (rule.has_tolerance() && y.squaredNorm() <= rule.eps2) return out;

  std::vector<int> sel;
  std::vector<char> used(m, 0);
  Eigen::VectorXd r = y;
  Eigen::VectorXd x;

  while (static_cast<int>(sel.size()) < cap) {
    int best = -1;
    double best_abs = 1e-12;
    for (int j = 0; j < m; ++j) {
      if (used[j]) continue;
      const double a = std::abs(dict.atoms.col(j).dot(r));
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (best < 0) break;
    sel.push_back(best);
    used[best] = 1;

    Eigen::MatrixXd S(n, sel.size());
    for (size_t i = 0; i < sel.size(); ++i) S.col(static_cast<Eigen::Index>(i)) = dict.atoms.col(sel[i]);
    x = S.colPivHouseholderQr().solve(y);
    r = y - S * x;

    if (rule.has_tolerance() && r.squaredNorm() <= rule.eps2) break;
  }

  for (size_t i = 0; i < sel.size(); ++i) out.push_back({sel[i], x(static_cast<Eigen::Index>(i))});
  return out;
}

SingularPair top_singular_pair(const Eigen::MatrixXd& E) {
  const Eigen::MatrixXd G = E * E.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::Index last = G.rows() - 1;  // eigenvalues ascend
  SingularPair p;
  p.u = es.eigenvectors().col(last);
  int imax = 0;
  p.u.cwiseAbs().maxCoeff(&imax);
  if (p.u(imax) < 0.0) p.u = -p.u;
  p.x = E.transpose() * p.u;
  p.sigma = std::sqrt(std::max(0.0, es.eigenvalues()(last)));
  return p;
}

}  // namespace csc::ref
