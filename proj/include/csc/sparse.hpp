#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "csc/patches.hpp"

namespace csc {

// Overcomplete dictionary, one unit-norm atom per column.
struct Dictionary {
  Eigen::MatrixXd atoms;  // n x m

  int dim() const { return static_cast<int>(atoms.rows()); }
  int size() const { return static_cast<int>(atoms.cols()); }
};

// Validates shape, finiteness, and unit column norms (1e-6).
Dictionary make_dictionary(Eigen::MatrixXd atoms);

// When to stop adding atoms: a support-size budget, a squared-residual
// tolerance, or whichever of the two triggers first.
struct StopRule {
  int max_atoms = -1;   // < 0: no budget
  double eps2 = -1.0;   // < 0: no tolerance

  static StopRule budget(int t);
  static StopRule tolerance(double e2);
  static StopRule both(int t, double e2);
  bool has_budget() const { return max_atoms >= 0; }
  bool has_tolerance() const { return eps2 >= 0.0; }
};

struct CodeEntry {
  int atom;
  double coef;

  bool operator==(const CodeEntry&) const = default;
};

// Entries in selection order; coefficients are the final least-squares
// values over the whole support.
using ColumnCode = std::vector<CodeEntry>;

// One code per patch column.
struct SparseCode {
  std::vector<ColumnCode> columns;
};

// Greedy pursuit: repeatedly pick the atom most correlated with the
// residual (lowest index on ties), refit all coefficients by least
// squares, stop per `rule`. Also stops when the best |correlation| falls
// to 1e-12 or the selected atoms become numerically dependent. The
// support never exceeds min(m, signal dimension).
ColumnCode omp_encode(const Dictionary& dict, const Eigen::VectorXd& y, const StopRule& rule);

// Pursuit restricted to the rows where mask != 0. Atoms are renormalized
// over the known rows for selection; reported coefficients apply to the
// full atoms. A column with fewer than min_known known rows is skipped.
struct MaskedCode {
  bool skipped = false;
  ColumnCode code;
};

MaskedCode omp_encode_masked(const Dictionary& dict, const Eigen::VectorXd& y,
                             std::span<const uint8_t> mask, const StopRule& rule,
                             int min_known = 4);

Eigen::VectorXd reconstruct_column(const Dictionary& dict, const ColumnCode& code);

// Column-parallel batch versions.
SparseCode encode_columns(const Dictionary& dict, const PatchMatrix& X, const StopRule& rule);
SparseCode encode_columns_masked(const Dictionary& dict, const PatchMatrix& X,
                                 const std::vector<uint8_t>& masks,  // n*k, column-major
                                 const StopRule& rule, int min_known,
                                 std::vector<uint8_t>& accepted_out);
PatchMatrix decode_columns(const Dictionary& dict, const SparseCode& codes);

// Sum over columns of ||x_col - D code_col||^2.
double coding_error(const Dictionary& dict, const PatchMatrix& X, const SparseCode& codes);

size_t total_coefficients(const SparseCode& codes);

}  // namespace csc
