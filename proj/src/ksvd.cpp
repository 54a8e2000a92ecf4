#include "csc/ksvd.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace csc {

Dictionary dct_dictionary(int patch, int m) {
  if (patch <= 0 || m <= 0) throw std::invalid_argument("patch and m must be positive");
  const int P = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
  if (P * P != m) throw std::invalid_argument("atom count must be a perfect square");
  if (P < patch) throw std::invalid_argument("atom count too small for patch size");

  // 1-D half-sample cosine bank, one normalized column per frequency.
  Eigen::MatrixXd A(patch, P);
  for (int p = 0; p < P; ++p) {
    for (int t = 0; t < patch; ++t)
      A(t, p) = std::cos(std::numbers::pi * p * (t + 0.5) / P);
    A.col(p).normalize();
  }

  // Separable products, flattened column-by-column within the patch.
  Eigen::MatrixXd D(patch * patch, m);
  for (int q = 0; q < P; ++q)
    for (int p = 0; p < P; ++p) {
      const int j = q * P + p;
      for (int cc = 0; cc < patch; ++cc)
        for (int rr = 0; rr < patch; ++rr) D(cc * patch + rr, j) = A(rr, p) * A(cc, q);
    }
  return make_dictionary(std::move(D));
}

std::optional<RankOne> rank_one_svd(const Eigen::MatrixXd& E, const Eigen::VectorXd* u0,
                                    std::mt19937_64& rng, int max_iters, double tol) {
  const int n = static_cast<int>(E.rows());
  if (E.size() == 0 || E.norm() <= 1e-14) return std::nullopt;

  // Iterate on the small Gram side. Rows are computed independently so the
  // result is the same for any thread count.
  Eigen::MatrixXd G(n, n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) G.row(i).noalias() = E.row(i) * E.transpose();

  Eigen::VectorXd u;
  auto try_start = [&](const Eigen::VectorXd& cand) -> bool {
    if (cand.size() != n) return false;
    const double nrm = cand.norm();
    if (nrm <= 1e-14) return false;
    Eigen::VectorXd z = G * (cand / nrm);
    if (z.norm() <= 1e-14 * G.norm()) return false;
    u = cand / nrm;
    return true;
  };

  bool started = u0 && try_start(*u0);
  for (int attempt = 0; !started && attempt < 16; ++attempt) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd cand(n);
    for (int i = 0; i < n; ++i) cand(i) = dist(rng);
    started = try_start(cand);
  }
  if (!started) return std::nullopt;

  Eigen::VectorXd z(n);
  for (int it = 0; it < max_iters; ++it) {
    z.noalias() = G * u;
    const double nz = z.norm();
    if (nz <= 1e-300) return std::nullopt;
    z /= nz;
    const double delta = (z - u).norm();
    u = z;
    if (delta < tol) break;
  }

  RankOne r;
  r.u = u;
  r.x = E.transpose() * u;
  return r;
}

namespace {

// Flip so the largest-magnitude entry of the atom is positive; coefficients
// flip with it. Keeps retrained dictionaries reproducible.
void canonicalize_sign(Eigen::VectorXd& atom, Eigen::VectorXd* coefs) {
  int imax = 0;
  atom.cwiseAbs().maxCoeff(&imax);
  if (atom(imax) < 0.0) {
    atom = -atom;
    if (coefs) *coefs = -*coefs;
  }
}

// Squared reconstruction error of every column under the current codes.
std::vector<double> per_column_error(const Dictionary& dict, const SparseCode& codes,
                                     const PatchMatrix& Y, const std::vector<uint8_t>& masks) {
  const int n = static_cast<int>(Y.rows());
  const int k = static_cast<int>(Y.cols());
  std::vector<double> err(k);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd r = Y.col(c) - reconstruct_column(dict, codes.columns[c]);
    if (!masks.empty())
      for (int i = 0; i < n; ++i)
        if (!masks[static_cast<size_t>(c) * n + i]) r(i) = 0.0;
    err[c] = r.squaredNorm();
  }
  return err;
}

void replace_with_worst_patch(Dictionary& dict, const SparseCode& codes, const PatchMatrix& Y,
                              int l, std::mt19937_64& rng, std::vector<uint8_t>& consumed,
                              const std::vector<uint8_t>& masks) {
  const std::vector<double> err = per_column_error(dict, codes, Y, masks);
  int worst = -1;
  double worst_err = -1.0;
  for (int c = 0; c < static_cast<int>(err.size()); ++c) {
    if (consumed[c]) continue;
    if (err[c] > worst_err) {
      worst_err = err[c];
      worst = c;
    }
  }
  Eigen::VectorXd cand;
  if (worst >= 0) {
    cand = Y.col(worst);
    if (!masks.empty())
      for (int i = 0; i < dict.dim(); ++i)
        if (!masks[static_cast<size_t>(worst) * dict.dim() + i]) cand(i) = 0.0;
  }
  if (worst >= 0 && cand.norm() > 1e-12) {
    consumed[worst] = 1;
    cand /= cand.norm();
  } else {
    std::normal_distribution<double> dist(0.0, 1.0);
    do {
      cand.resize(dict.dim());
      for (int i = 0; i < dict.dim(); ++i) cand(i) = dist(rng);
    } while (cand.norm() <= 1e-12);
    cand /= cand.norm();
  }
  canonicalize_sign(cand, nullptr);
  dict.atoms.col(l) = cand;
}

}  // namespace

void update_atom(Dictionary& dict, SparseCode& codes, const PatchMatrix& Y, int l,
                 UnusedAtomPolicy policy, std::mt19937_64& rng, std::vector<uint8_t>& consumed,
                 const std::vector<uint8_t>& masks) {
  const int n = dict.dim();
  if (Y.rows() != n) throw std::invalid_argument("patch dimension mismatch");
  if (l < 0 || l >= dict.size()) throw std::invalid_argument("atom index out of range");
  const int k = static_cast<int>(Y.cols());
  if (static_cast<int>(codes.columns.size()) != k)
    throw std::invalid_argument("codes do not match patch matrix");
  if (!masks.empty() && masks.size() != static_cast<size_t>(n) * k)
    throw std::invalid_argument("mask matrix dimension mismatch");
  if (consumed.size() != static_cast<size_t>(k)) consumed.assign(k, 0);

  // Patches whose support includes atom l, and where its coefficient sits.
  std::vector<int> users, entry_of;
  for (int c = 0; c < k; ++c) {
    const ColumnCode& code = codes.columns[c];
    for (size_t e = 0; e < code.size(); ++e) {
      if (code[e].atom == l) {
        users.push_back(c);
        entry_of.push_back(static_cast<int>(e));
        break;
      }
    }
  }

  if (users.empty()) {
    if (policy == UnusedAtomPolicy::kReplaceWithWorstPatch)
      replace_with_worst_patch(dict, codes, Y, l, rng, consumed, masks);
    return;
  }

  // Error the other atoms leave on the using patches.
  const int ku = static_cast<int>(users.size());
  Eigen::MatrixXd E(n, ku);
#pragma omp parallel for schedule(static)
  for (int uc = 0; uc < ku; ++uc) {
    const int c = users[uc];
    Eigen::VectorXd e = Y.col(c) - reconstruct_column(dict, codes.columns[c]);
    e += codes.columns[c][entry_of[uc]].coef * dict.atoms.col(l);
    if (!masks.empty())
      for (int i = 0; i < n; ++i)
        if (!masks[static_cast<size_t>(c) * n + i]) e(i) = 0.0;
    E.col(uc) = e;
  }

  Eigen::VectorXd warm = dict.atoms.col(l);
  std::optional<RankOne> r = rank_one_svd(E, &warm, rng);
  if (!r) {
    if (policy == UnusedAtomPolicy::kReplaceWithWorstPatch)
      replace_with_worst_patch(dict, codes, Y, l, rng, consumed, masks);
    return;
  }

  canonicalize_sign(r->u, &r->x);
  dict.atoms.col(l) = r->u;
  for (int uc = 0; uc < ku; ++uc)
    codes.columns[users[uc]][entry_of[uc]].coef = r->x(uc);
}

namespace {

TrainResult train_impl(const PatchMatrix& Y, const std::vector<uint8_t>& masks,
                       const Dictionary& D0, const TrainConfig& cfg, int min_known) {
  if (cfg.iterations < 1) throw std::invalid_argument("need at least one iteration");
  if (Y.cols() < 1) throw std::invalid_argument("empty training set");
  if (Y.rows() != D0.dim()) throw std::invalid_argument("patch dimension mismatch");

  TrainResult res;
  res.dict = D0;
  std::mt19937_64 rng(cfg.seed);

  for (int it = 0; it < cfg.iterations; ++it) {
    SparseCode codes;
    if (masks.empty()) {
      codes = encode_columns(res.dict, Y, cfg.stop);
    } else {
      std::vector<uint8_t> accepted;
      codes = encode_columns_masked(res.dict, Y, masks, cfg.stop, min_known, accepted);
    }

    double obj = 0.0;
    {
      const std::vector<double> err = per_column_error(res.dict, codes, Y, masks);
      for (double v : err) obj += v;
    }
    res.objective.push_back(obj);

    std::vector<uint8_t> consumed(Y.cols(), 0);
    for (int l = 0; l < res.dict.size(); ++l)
      update_atom(res.dict, codes, Y, l, cfg.unused, rng, consumed, masks);
  }
  return res;
}

}  // namespace

TrainResult train(const PatchMatrix& Y, const Dictionary& D0, const TrainConfig& cfg) {
  return train_impl(Y, {}, D0, cfg, 0);
}

TrainResult train_masked(const PatchMatrix& Y, const std::vector<uint8_t>& masks,
                         const Dictionary& D0, const TrainConfig& cfg, int min_known) {
  if (masks.size() != static_cast<size_t>(Y.rows()) * Y.cols())
    throw std::invalid_argument("mask matrix dimension mismatch");
  return train_impl(Y, masks, D0, cfg, min_known);
}

}  // namespace csc
