#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "csc/sparse.hpp"

namespace csc {

// What to do when an atom ends up unused by every training patch.
enum class UnusedAtomPolicy {
  kReplaceWithWorstPatch,  // normalized copy of the worst-reconstructed patch
  kKeep,
};

struct TrainConfig {
  int iterations = 20;
  StopRule stop = StopRule::budget(4);
  uint64_t seed = 1;
  UnusedAtomPolicy unused = UnusedAtomPolicy::kReplaceWithWorstPatch;
};

// Separable cosine basis: m must be a perfect square with sqrt(m) >= patch.
// Atom 0 is the flat (DC) atom; all atoms have unit norm.
Dictionary dct_dictionary(int patch, int m);

// Dominant singular pair of E via power iteration on E E^T, warm-started
// at u0 when given. Returns the left vector u (unit norm) and x = E^T u;
// nullopt when E is numerically zero. rng supplies restart vectors if the
// start is orthogonal to the column space.
struct RankOne {
  Eigen::VectorXd u;
  Eigen::VectorXd x;
};
std::optional<RankOne> rank_one_svd(const Eigen::MatrixXd& E, const Eigen::VectorXd* u0,
                                    std::mt19937_64& rng, int max_iters = 1000,
                                    double tol = 1e-10);

// One dictionary-update step: refit atom l (and the coefficients of the
// patches using it) to the coding error left by the other atoms. Supports
// are preserved. Unused atoms follow `policy`; `consumed` marks patches
// already spent on replacements this sweep (pass one vector per sweep).
// The optional column mask matrix (n x k, column-major, may be empty)
// zeroes unknown rows of the error before the rank-one fit.
void update_atom(Dictionary& dict, SparseCode& codes, const PatchMatrix& Y, int l,
                 UnusedAtomPolicy policy, std::mt19937_64& rng, std::vector<uint8_t>& consumed,
                 const std::vector<uint8_t>& masks = {});

struct TrainResult {
  Dictionary dict;
  std::vector<double> objective;  // coding error after each iteration's encode
};

// Alternating sparse coding and sequential atom updates, starting from D0.
TrainResult train(const PatchMatrix& Y, const Dictionary& D0, const TrainConfig& cfg);

// Same, but every patch column carries a known-pixel mask (n x k flags,
// column-major): coding uses the masked pursuit, updates ignore unknown
// rows. Patches with fewer than min_known known pixels are left out.
TrainResult train_masked(const PatchMatrix& Y, const std::vector<uint8_t>& masks,
                         const Dictionary& D0, const TrainConfig& cfg, int min_known = 4);

}  // namespace csc
