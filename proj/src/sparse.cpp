#include "csc/sparse.hpp"

#include <cmath>
#include <stdexcept>

namespace csc {

Dictionary make_dictionary(Eigen::MatrixXd atoms) {
  if (atoms.rows() <= 0 || atoms.cols() <= 0)
    throw std::invalid_argument("dictionary must be non-empty");
  if (!atoms.allFinite()) throw std::invalid_argument("dictionary holds non-finite values");
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    const double nrm = atoms.col(j).norm();
    if (std::abs(nrm - 1.0) > 1e-6)
      throw std::invalid_argument("dictionary atoms must have unit norm");
  }
  return Dictionary{std::move(atoms)};
}

StopRule StopRule::budget(int t) {
  if (t < 1) throw std::invalid_argument("budget must be at least 1");
  return StopRule{t, -1.0};
}

StopRule StopRule::tolerance(double e2) {
  if (e2 < 0.0 || !std::isfinite(e2)) throw std::invalid_argument("tolerance must be >= 0");
  return StopRule{-1, e2};
}

StopRule StopRule::both(int t, double e2) {
  if (t < 1) throw std::invalid_argument("budget must be at least 1");
  if (e2 < 0.0 || !std::isfinite(e2)) throw std::invalid_argument("tolerance must be >= 0");
  return StopRule{t, e2};
}

namespace {

constexpr double kCorrFloor = 1e-12;   // below this the residual is treated as flat
constexpr double kCholFloor = 1e-12;   // 1 - ||w||^2 floor before atoms count as dependent

// Masked pursuits solve a least-squares fit on the known rows only and the
// result is extrapolated to the missing ones, so they need stronger
// conditioning than the full-signal path:
//  - an atom whose known-row norm is tiny gets its coefficient rescaled by a
//    huge factor; refuse atoms below kMaskedAtomFloor (amplification <= 5x).
//  - near-dependent supports produce wild coefficient pairs that cancel on
//    the known rows but not elsewhere; kMaskedCholFloor rejects them early.
constexpr double kMaskedAtomFloor = 0.2;
constexpr double kMaskedCholFloor = 1e-4;

// Shared greedy loop. D must have unit-norm (or zero, never-selectable)
// columns. Selected coefficients are refit by least squares after every
// pick via a progressively extended Cholesky factor of the support Gram.
ColumnCode greedy_pursuit(const Eigen::Ref<const Eigen::MatrixXd>& D,
                          const Eigen::Ref<const Eigen::VectorXd>& y, const StopRule& rule,
                          double chol_floor = kCholFloor) {
  const int n = static_cast<int>(D.rows());
  const int m = static_cast<int>(D.cols());
  int cap = std::min(n, m);
  if (rule.has_budget()) cap = std::min(cap, rule.max_atoms);

  ColumnCode out;
  if (rule.has_tolerance() && y.squaredNorm() <= rule.eps2) return out;

  Eigen::VectorXd r = y;
  Eigen::MatrixXd L(cap, cap);          // lower Cholesky of D_sel^T D_sel
  Eigen::MatrixXd Dsel(n, cap);
  Eigen::VectorXd beta(cap);            // D_sel^T y
  Eigen::VectorXd corr(m), w, x;
  std::vector<int> sel;
  std::vector<char> used(m, 0);
  sel.reserve(cap);

  for (int k = 0; k < cap; ++k) {
    corr.noalias() = D.transpose() * r;
    int best = -1;
    double best_abs = kCorrFloor;
    for (int j = 0; j < m; ++j) {
      if (used[j]) continue;
      const double a = std::abs(corr[j]);
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (best < 0) break;

    if (k == 0) {
      L(0, 0) = 1.0;
    } else {
      w = Dsel.leftCols(k).transpose() * D.col(best);
      L.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(w);
      const double d2 = 1.0 - w.squaredNorm();
      if (d2 <= chol_floor) break;  // numerically dependent on the support
      L.block(k, 0, 1, k) = w.transpose();
      L(k, k) = std::sqrt(d2);
    }
    Dsel.col(k) = D.col(best);
    beta(k) = D.col(best).dot(y);
    sel.push_back(best);
    used[best] = 1;

    x = beta.head(k + 1);
    L.topLeftCorner(k + 1, k + 1).triangularView<Eigen::Lower>().solveInPlace(x);
    L.topLeftCorner(k + 1, k + 1).transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    r.noalias() = y - Dsel.leftCols(k + 1) * x;

    if (rule.has_tolerance() && r.squaredNorm() <= rule.eps2) break;
  }

  out.reserve(sel.size());
  for (size_t i = 0; i < sel.size(); ++i) out.push_back({sel[i], x[static_cast<int>(i)]});
  return out;
}

}  // namespace

ColumnCode omp_encode(const Dictionary& dict, const Eigen::VectorXd& y, const StopRule& rule) {
  if (y.size() != dict.dim()) throw std::invalid_argument("signal dimension mismatch");
  return greedy_pursuit(dict.atoms, y, rule);
}

MaskedCode omp_encode_masked(const Dictionary& dict, const Eigen::VectorXd& y,
                             std::span<const uint8_t> mask, const StopRule& rule,
                             int min_known) {
  if (y.size() != dict.dim()) throw std::invalid_argument("signal dimension mismatch");
  if (static_cast<int>(mask.size()) != dict.dim())
    throw std::invalid_argument("mask dimension mismatch");
  const int n = dict.dim();
  const int m = dict.size();

  std::vector<int> rows;
  rows.reserve(n);
  for (int i = 0; i < n; ++i)
    if (mask[i]) rows.push_back(i);

  MaskedCode res;
  if (static_cast<int>(rows.size()) < min_known) {
    res.skipped = true;
    return res;
  }
  if (static_cast<int>(rows.size()) == n) {
    // fully known: same arithmetic as the unmasked path
    res.code = greedy_pursuit(dict.atoms, y, rule);
    return res;
  }

  const int nk = static_cast<int>(rows.size());
  Eigen::MatrixXd Dm(nk, m);
  Eigen::VectorXd ym(nk);
  for (int i = 0; i < nk; ++i) {
    ym(i) = y(rows[i]);
    for (int j = 0; j < m; ++j) Dm(i, j) = dict.atoms(rows[i], j);
  }
  Eigen::VectorXd scale(m);
  for (int j = 0; j < m; ++j) {
    const double s = Dm.col(j).norm();
    if (s >= kMaskedAtomFloor) {
      Dm.col(j) /= s;
      scale(j) = s;
    } else {
      Dm.col(j).setZero();  // never selectable: rescaling would blow up
      scale(j) = 1.0;
    }
  }

  res.code = greedy_pursuit(Dm, ym, rule, kMaskedCholFloor);
  for (auto& e : res.code) e.coef /= scale(e.atom);
  return res;
}

Eigen::VectorXd reconstruct_column(const Dictionary& dict, const ColumnCode& code) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dict.dim());
  for (const auto& e : code) {
    if (e.atom < 0 || e.atom >= dict.size())
      throw std::invalid_argument("code references atom outside dictionary");
    v += e.coef * dict.atoms.col(e.atom);
  }
  return v;
}

SparseCode encode_columns(const Dictionary& dict, const PatchMatrix& X, const StopRule& rule) {
  if (X.rows() != dict.dim()) throw std::invalid_argument("patch dimension mismatch");
  const int k = static_cast<int>(X.cols());
  SparseCode codes;
  codes.columns.resize(k);
#pragma omp parallel for schedule(dynamic, 16)
  for (int c = 0; c < k; ++c) codes.columns[c] = greedy_pursuit(dict.atoms, X.col(c), rule);
  return codes;
}

SparseCode encode_columns_masked(const Dictionary& dict, const PatchMatrix& X,
                                 const std::vector<uint8_t>& masks, const StopRule& rule,
                                 int min_known, std::vector<uint8_t>& accepted_out) {
  if (X.rows() != dict.dim()) throw std::invalid_argument("patch dimension mismatch");
  const int n = dict.dim();
  const int k = static_cast<int>(X.cols());
  if (masks.size() != static_cast<size_t>(n) * k)
    throw std::invalid_argument("mask matrix dimension mismatch");
  SparseCode codes;
  codes.columns.resize(k);
  accepted_out.assign(k, 0);
#pragma omp parallel for schedule(dynamic, 16)
  for (int c = 0; c < k; ++c) {
    std::span<const uint8_t> mask(masks.data() + static_cast<size_t>(c) * n, n);
    MaskedCode mc = omp_encode_masked(dict, X.col(c), mask, rule, min_known);
    if (!mc.skipped) {
      accepted_out[c] = 1;
      codes.columns[c] = std::move(mc.code);
    }
  }
  return codes;
}

PatchMatrix decode_columns(const Dictionary& dict, const SparseCode& codes) {
  const int k = static_cast<int>(codes.columns.size());
  PatchMatrix out(dict.dim(), k);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < k; ++c) out.col(c) = reconstruct_column(dict, codes.columns[c]);
  return out;
}

double coding_error(const Dictionary& dict, const PatchMatrix& X, const SparseCode& codes) {
  if (X.rows() != dict.dim() || X.cols() != static_cast<Eigen::Index>(codes.columns.size()))
    throw std::invalid_argument("codes do not match patch matrix");
  const int k = static_cast<int>(X.cols());
  std::vector<double> per_col(k);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < k; ++c)
    per_col[c] = (X.col(c) - reconstruct_column(dict, codes.columns[c])).squaredNorm();
  double acc = 0.0;
  for (double v : per_col) acc += v;  // fixed order, independent of threads
  return acc;
}

size_t total_coefficients(const SparseCode& codes) {
  size_t t = 0;
  for (const auto& c : codes.columns) t += c.size();
  return t;
}

}  // namespace csc
