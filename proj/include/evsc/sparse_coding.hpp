#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace evsc {

/// Energy-minimization constants. sigma == nullopt means "resolve to the
/// standard deviation of all training-surface values" (fallback 1 if that
/// is zero); training records the resolved value.
struct SparseParams {
  double lambda = 0.1;                 // sparseness weight, >= 0
  std::optional<double> sigma;         // scaling constant, > 0 once resolved
  double eta = 0.05;                   // dictionary learning rate, > 0
  double eps_smooth = 1e-6;            // L1 smoothing constant, > 0
  int max_cg_iters = 100;
  double cg_tol = 1e-6;                // relative energy change per CG step
  int epochs_max = 200;
  double epoch_tol = 1e-4;             // relative epoch-mean energy change

  double sigma_or(double fallback) const { return sigma.value_or(fallback); }
  void validate() const;  // throws Error on out-of-range fields
};

/// N elementary time-surfaces of one (sub-)layer, one atom per column.
struct Dictionary {
  Eigen::MatrixXd atoms;  // D x N

  int dim() const { return static_cast<int>(atoms.rows()); }
  int atom_count() const { return static_cast<int>(atoms.cols()); }
};

/// Exact objective: squared reconstruction error plus lambda * sum|a_j/sigma|.
/// This is the reported metric; inference minimizes the smoothed variant.
double energy_exact(const Eigen::VectorXd& surface, const Dictionary& dict,
                    const Eigen::VectorXd& coeffs, const SparseParams& params);

/// Smoothed objective: the L1 term replaced by sqrt(a^2 + eps^2)/sigma so the
/// gradient exists everywhere.
double energy_smoothed(const Eigen::VectorXd& surface, const Dictionary& dict,
                       const Eigen::VectorXd& coeffs, const SparseParams& params);

struct InferenceResult {
  Eigen::VectorXd coeffs;       // in [-1, 1]^N
  double smoothed_energy = 0;   // at coeffs
  double warm_start_energy = 0; // smoothed energy at the warm start
  int iterations = 0;
};

/// Box-constrained nonlinear conjugate gradient solver bound to one
/// dictionary. The Gram matrix is precomputed once, so per-event inference
/// costs O(N*D) for the correlation vector plus O(N^2) per iteration.
/// Iterates are projected onto [-1,1]^N; the CG direction restarts whenever
/// the projection clips. Only energy-decreasing steps are accepted, so the
/// returned smoothed energy never exceeds the warm start's.
class CoefficientSolver {
 public:
  CoefficientSolver(const Dictionary& dict, const SparseParams& params);

  /// Re-reads the atoms after an external dictionary update.
  void refresh(const Dictionary& dict);

  InferenceResult infer(const Eigen::VectorXd& surface);

  const SparseParams& params() const { return params_; }

 private:
  double objective(const Eigen::VectorXd& a) const;
  void gradient(const Eigen::VectorXd& a, Eigen::VectorXd& g) const;

  SparseParams params_;
  double kappa_ = 0;            // lambda / sigma
  Eigen::MatrixXd atoms_;       // D x N copy
  Eigen::MatrixXd gram_;        // N x N
  Eigen::VectorXd corr_;        // workspace: atoms^T * surface
  Eigen::VectorXd a_, g_, g_next_, gf_, gf_next_, dir_, trial_, gram_dir_;
  double surface_sq_ = 0;       // workspace: |surface|^2
};

/// Single-call convenience; builds a solver per call. sigma must be set.
InferenceResult infer_coefficients(const Eigen::VectorXd& surface, const Dictionary& dict,
                                   const SparseParams& params);

/// Hebbian-style atom update: phi_j += eta * a_j * r with the residual
/// r = S - sum_k a_k phi_k taken before any atom moves, then every atom is
/// renormalized to unit Euclidean norm.
Dictionary update_dictionary(const Dictionary& dict, const Eigen::VectorXd& surface,
                             const Eigen::VectorXd& coeffs, const SparseParams& params);

struct TrainReport {
  int atom_count = 0;
  int dim = 0;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  SparseParams resolved;              // sigma filled in
  std::vector<double> epoch_mean_energy;  // exact energy, one entry per epoch
  bool converged = false;
  int epochs_run = 0;
};

/// Learns a dictionary by sweeping the batch in seeded-shuffled order,
/// alternating inference and the atom update per surface. Deterministic
/// given (batch, N, params, seed).
std::pair<Dictionary, TrainReport> train_dictionary(const std::vector<Eigen::VectorXd>& batch,
                                                    int atom_count, const SparseParams& params,
                                                    std::uint64_t seed);

struct SizeCandidate {
  int atom_count = 0;
  double mean_reconstruction_error = 0;  // first energy term only
};

struct SizeSelection {
  int best_atom_count = 0;
  std::vector<SizeCandidate> table;
};

/// Picks the candidate with the lowest error; candidates within 1e-12 of the
/// minimum tie toward the smaller N. Split out so the rule is testable.
int pick_best_candidate(const std::vector<SizeCandidate>& table);

SizeSelection select_dictionary_size(const std::vector<Eigen::VectorXd>& batch,
                                     const std::vector<int>& candidate_atom_counts,
                                     const SparseParams& params, std::uint64_t seed);

/// Dictionary text format: "# dict v1 n=<N> d=<D> c=<C> r=<R>" then one atom
/// per line, comma-separated full-precision reals. channels/radius describe
/// the geometry the atoms were trained over.
std::string write_dictionary(const Dictionary& dict, int channels, int radius);
struct LoadedDictionary {
  Dictionary dict;
  int channels = 0;
  int radius = 0;
};
LoadedDictionary parse_dictionary(std::string_view text);
void save_dictionary_file(const std::string& path, const Dictionary& dict, int channels, int radius);
LoadedDictionary load_dictionary_file(const std::string& path);

}  // namespace evsc
