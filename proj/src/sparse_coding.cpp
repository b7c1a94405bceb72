#include "evsc/sparse_coding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "evsc/error.hpp"
#include "evsc/rng.hpp"

namespace evsc {

void SparseParams::validate() const {
  if (lambda < 0) throw config_error("lambda must be >= 0");
  if (sigma && !(*sigma > 0)) throw config_error("sigma must be > 0");
  if (!(eta > 0)) throw config_error("eta must be > 0");
  if (!(eps_smooth > 0)) throw config_error("eps_smooth must be > 0");
  if (max_cg_iters < 1) throw config_error("max_cg_iters must be >= 1");
  if (!(cg_tol > 0)) throw config_error("cg_tol must be > 0");
  if (epochs_max < 1) throw config_error("epochs_max must be >= 1");
  if (!(epoch_tol > 0)) throw config_error("epoch_tol must be > 0");
}

namespace {

void check_dims(const Eigen::VectorXd& surface, const Dictionary& dict) {
  if (surface.size() != dict.atoms.rows()) {
    throw dimension_error("surface has " + std::to_string(surface.size()) + " cells, atoms have " +
                          std::to_string(dict.atoms.rows()));
  }
}

void check_coeff_dims(const Dictionary& dict, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != dict.atoms.cols()) {
    throw dimension_error("coefficient vector has " + std::to_string(coeffs.size()) +
                          " entries, dictionary has " + std::to_string(dict.atoms.cols()) +
                          " atoms");
  }
}

double require_sigma(const SparseParams& params) {
  if (!params.sigma) throw config_error("sigma unresolved; train first or set it explicitly");
  return *params.sigma;
}

}  // namespace

double energy_exact(const Eigen::VectorXd& surface, const Dictionary& dict,
                    const Eigen::VectorXd& coeffs, const SparseParams& params) {
  check_dims(surface, dict);
  check_coeff_dims(dict, coeffs);
  double sigma = require_sigma(params);
  double recon = (surface - dict.atoms * coeffs).squaredNorm();
  return recon + params.lambda / sigma * coeffs.cwiseAbs().sum();
}

double energy_smoothed(const Eigen::VectorXd& surface, const Dictionary& dict,
                       const Eigen::VectorXd& coeffs, const SparseParams& params) {
  check_dims(surface, dict);
  check_coeff_dims(dict, coeffs);
  double sigma = require_sigma(params);
  double recon = (surface - dict.atoms * coeffs).squaredNorm();
  double eps2 = params.eps_smooth * params.eps_smooth;
  double smooth = 0;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    smooth += std::sqrt(coeffs[j] * coeffs[j] + eps2);
  }
  return recon + params.lambda / sigma * smooth;
}

CoefficientSolver::CoefficientSolver(const Dictionary& dict, const SparseParams& params)
    : params_(params) {
  params_.validate();
  kappa_ = params_.lambda / require_sigma(params_);
  refresh(dict);
}

void CoefficientSolver::refresh(const Dictionary& dict) {
  if (dict.atom_count() < 1) throw dimension_error("dictionary has no atoms");
  atoms_ = dict.atoms;
  gram_.noalias() = atoms_.transpose() * atoms_;
  const Eigen::Index n = atoms_.cols();
  corr_.resize(n);
  a_.resize(n);
  g_.resize(n);
  g_next_.resize(n);
  gf_.resize(n);
  gf_next_.resize(n);
  dir_.resize(n);
  trial_.resize(n);
  gram_dir_.resize(n);
}

double CoefficientSolver::objective(const Eigen::VectorXd& a) const {
  double f = a.dot(gram_ * a) - 2.0 * corr_.dot(a) + surface_sq_;
  if (kappa_ > 0) {
    const double eps2 = params_.eps_smooth * params_.eps_smooth;
    for (Eigen::Index j = 0; j < a.size(); ++j) f += kappa_ * std::sqrt(a[j] * a[j] + eps2);
  }
  return f;
}

void CoefficientSolver::gradient(const Eigen::VectorXd& a, Eigen::VectorXd& g) const {
  g.noalias() = gram_ * a;
  g -= corr_;
  g *= 2.0;
  if (kappa_ > 0) {
    const double eps2 = params_.eps_smooth * params_.eps_smooth;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      g[j] += kappa_ * a[j] / std::sqrt(a[j] * a[j] + eps2);
    }
  }
}

InferenceResult CoefficientSolver::infer(const Eigen::VectorXd& surface) {
  if (surface.size() != atoms_.rows()) {
    throw dimension_error("surface has " + std::to_string(surface.size()) + " cells, atoms have " +
                          std::to_string(atoms_.rows()));
  }
  const Eigen::Index n = atoms_.cols();
  corr_.noalias() = atoms_.transpose() * surface;
  surface_sq_ = surface.squaredNorm();

  // Warm start: correlations with the atoms, clipped into the box.
  a_ = corr_.cwiseMax(-1.0).cwiseMin(1.0);
  double f = objective(a_);
  const double warm = f;

  // The direction lives on the free coordinates: at a bound whose gradient
  // points outward the box blocks descent, so that coordinate is frozen.
  auto free_gradient = [n](const Eigen::VectorXd& a, const Eigen::VectorXd& g,
                           Eigen::VectorXd& gf) {
    for (Eigen::Index j = 0; j < n; ++j) {
      bool blocked = (a[j] >= 1.0 && g[j] < 0.0) || (a[j] <= -1.0 && g[j] > 0.0);
      gf[j] = blocked ? 0.0 : g[j];
    }
  };

  gradient(a_, g_);
  free_gradient(a_, g_, gf_);
  dir_ = -gf_;

  int iter = 0;
  bool just_restarted = true;
  while (iter < params_.max_cg_iters) {
    double slope = dir_.dot(g_);
    if (slope >= 0.0) {  // not a descent direction; fall back to steepest
      dir_ = -gf_;
      just_restarted = true;
      slope = -gf_.squaredNorm();
    }
    if (!(slope < 0.0)) break;  // stationary within the box

    // Longest step that keeps every coordinate inside the box.
    double alpha_max = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (dir_[j] > 0.0) {
        alpha_max = std::min(alpha_max, (1.0 - a_[j]) / dir_[j]);
      } else if (dir_[j] < 0.0) {
        alpha_max = std::min(alpha_max, (-1.0 - a_[j]) / dir_[j]);
      }
    }
    if (!(alpha_max > 0.0)) {
      if (just_restarted) break;
      dir_ = -gf_;
      just_restarted = true;
      continue;
    }

    // The reconstruction term is quadratic; its exact minimizer along dir_
    // seeds the backtracking. The smoothed-L1 curvature only shortens steps,
    // which the Armijo loop handles.
    gram_dir_.noalias() = gram_ * dir_;
    const double dgd = dir_.dot(gram_dir_);
    double alpha = dgd > 0.0 ? -slope / (2.0 * dgd) : alpha_max;
    bool hit_boundary = false;
    if (alpha >= alpha_max) {
      alpha = alpha_max;
      hit_boundary = true;
    }

    constexpr double kArmijo = 1e-4;
    double f_trial = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial_ = a_ + alpha * dir_;
      trial_ = trial_.cwiseMax(-1.0).cwiseMin(1.0);
      f_trial = objective(trial_);
      if (f_trial <= f + kArmijo * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
      hit_boundary = false;
    }
    if (!accepted) break;  // no decrease left at floating-point resolution

    ++iter;
    a_.swap(trial_);
    gradient(a_, g_next_);
    free_gradient(a_, g_next_, gf_next_);

    double beta = 0.0;
    if (!hit_boundary) {  // Polak-Ribiere+, restarted whenever the box clips
      double denom = gf_.squaredNorm();
      if (denom > 0.0) beta = std::max(0.0, gf_next_.dot(gf_next_ - gf_) / denom);
    }
    dir_ = -gf_next_ + beta * dir_;
    just_restarted = beta == 0.0;
    g_.swap(g_next_);
    gf_.swap(gf_next_);

    const double decrease = f - f_trial;
    const bool converged = decrease <= params_.cg_tol * std::max(std::abs(f), 1e-300);
    f = f_trial;
    if (converged) break;
  }

  InferenceResult result;
  result.coeffs = a_;
  result.smoothed_energy = f;
  result.warm_start_energy = warm;
  result.iterations = iter;
  return result;
}

InferenceResult infer_coefficients(const Eigen::VectorXd& surface, const Dictionary& dict,
                                   const SparseParams& params) {
  check_dims(surface, dict);
  CoefficientSolver solver(dict, params);
  return solver.infer(surface);
}

Dictionary update_dictionary(const Dictionary& dict, const Eigen::VectorXd& surface,
                             const Eigen::VectorXd& coeffs, const SparseParams& params) {
  check_dims(surface, dict);
  check_coeff_dims(dict, coeffs);
  Dictionary out = dict;
  Eigen::VectorXd residual = surface - dict.atoms * coeffs;
  out.atoms.noalias() += params.eta * residual * coeffs.transpose();
  for (Eigen::Index j = 0; j < out.atoms.cols(); ++j) {
    double norm = out.atoms.col(j).norm();
    if (norm > 0) out.atoms.col(j) /= norm;
  }
  return out;
}

std::pair<Dictionary, TrainReport> train_dictionary(const std::vector<Eigen::VectorXd>& batch,
                                                    int atom_count, const SparseParams& params,
                                                    std::uint64_t seed) {
  params.validate();
  if (batch.empty()) throw validate_error("training batch is empty");
  if (atom_count < 1) throw config_error("atom count must be >= 1");
  const Eigen::Index dim = batch.front().size();
  for (const auto& s : batch) {
    if (s.size() != dim) throw dimension_error("training surfaces have inconsistent dimensions");
  }

  SparseParams resolved = params;
  if (!resolved.sigma) {
    // Standard deviation of all training-surface values, fallback 1.
    double sum = 0, sum_sq = 0;
    for (const auto& s : batch) {
      sum += s.sum();
      sum_sq += s.squaredNorm();
    }
    double count = static_cast<double>(batch.size()) * static_cast<double>(dim);
    double mean = sum / count;
    double var = std::max(0.0, sum_sq / count - mean * mean);
    double sd = std::sqrt(var);
    resolved.sigma = sd > 0 ? sd : 1.0;
  }

  Rng rng(seed);
  Dictionary dict;
  dict.atoms.resize(dim, atom_count);
  for (Eigen::Index j = 0; j < atom_count; ++j) {
    for (Eigen::Index d = 0; d < dim; ++d) dict.atoms(d, j) = rng.uniform01();
    dict.atoms.col(j).normalize();
  }

  TrainReport report;
  report.atom_count = atom_count;
  report.dim = static_cast<int>(dim);
  report.batch_size = batch.size();
  report.seed = seed;
  report.resolved = resolved;

  CoefficientSolver solver(dict, resolved);
  std::vector<std::size_t> order(batch.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < resolved.epochs_max; ++epoch) {
    rng.shuffle(order);
    double energy_sum = 0;
    for (std::size_t idx : order) {
      const Eigen::VectorXd& s = batch[idx];
      InferenceResult res = solver.infer(s);
      energy_sum += energy_exact(s, dict, res.coeffs, resolved);
      dict = update_dictionary(dict, s, res.coeffs, resolved);
      solver.refresh(dict);
    }
    double mean = energy_sum / static_cast<double>(batch.size());
    report.epoch_mean_energy.push_back(mean);
    report.epochs_run = epoch + 1;
    if (epoch > 0) {
      double prev = report.epoch_mean_energy[epoch - 1];
      bool non_increasing = prev >= mean;
      bool small_change = prev - mean <= resolved.epoch_tol * std::max(std::abs(prev), 1e-300);
      if (non_increasing && small_change) {
        report.converged = true;
        break;
      }
    }
  }
  if (!dict.atoms.allFinite()) {
    throw validate_error("training produced a non-finite atom; check the input surfaces");
  }
  return {std::move(dict), std::move(report)};
}

int pick_best_candidate(const std::vector<SizeCandidate>& table) {
  if (table.empty()) throw validate_error("candidate list is empty");
  double best_err = std::numeric_limits<double>::infinity();
  for (const auto& c : table) best_err = std::min(best_err, c.mean_reconstruction_error);
  int best_n = std::numeric_limits<int>::max();
  for (const auto& c : table) {
    if (c.mean_reconstruction_error <= best_err + 1e-12) best_n = std::min(best_n, c.atom_count);
  }
  return best_n;
}

SizeSelection select_dictionary_size(const std::vector<Eigen::VectorXd>& batch,
                                     const std::vector<int>& candidate_atom_counts,
                                     const SparseParams& params, std::uint64_t seed) {
  if (candidate_atom_counts.empty()) throw validate_error("candidate list is empty");
  SizeSelection out;
  for (int n : candidate_atom_counts) {
    std::uint64_t sub_seed = derive_seed(seed, "sweep-n-" + std::to_string(n));
    auto [dict, report] = train_dictionary(batch, n, params, sub_seed);
    CoefficientSolver solver(dict, report.resolved);
    double err_sum = 0;
    for (const auto& s : batch) {
      InferenceResult res = solver.infer(s);
      err_sum += (s - dict.atoms * res.coeffs).squaredNorm();
    }
    out.table.push_back({n, err_sum / static_cast<double>(batch.size())});
  }
  out.best_atom_count = pick_best_candidate(out.table);
  return out;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::string write_dictionary(const Dictionary& dict, int channels, int radius) {
  std::string out;
  char header[96];
  std::snprintf(header, sizeof header, "# dict v1 n=%d d=%d c=%d r=%d\n", dict.atom_count(),
                dict.dim(), channels, radius);
  out += header;
  for (Eigen::Index j = 0; j < dict.atoms.cols(); ++j) {
    for (Eigen::Index d = 0; d < dict.atoms.rows(); ++d) {
      if (d > 0) out.push_back(',');
      append_double(out, dict.atoms(d, j));
    }
    out.push_back('\n');
  }
  return out;
}

LoadedDictionary parse_dictionary(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw parse_error("empty dictionary file");
  int n = 0, d = 0, c = 0, r = 0;
  if (std::sscanf(line.c_str(), "# dict v1 n=%d d=%d c=%d r=%d", &n, &d, &c, &r) != 4 || n < 1 ||
      d < 1) {
    throw parse_error("bad dictionary header '" + line + "'");
  }
  LoadedDictionary out;
  out.channels = c;
  out.radius = r;
  out.dict.atoms.resize(d, n);
  for (int j = 0; j < n; ++j) {
    if (!std::getline(in, line)) {
      throw parse_error("dictionary atom " + std::to_string(j + 1) + " missing");
    }
    const char* ptr = line.c_str();
    const char* end = ptr + line.size();
    for (int k = 0; k < d; ++k) {
      double value = 0;
      auto [next, ec] = std::from_chars(ptr, end, value);
      if (ec != std::errc{}) {
        throw parse_error("atom " + std::to_string(j + 1) + ": bad value at column " +
                          std::to_string(k + 1));
      }
      if (!std::isfinite(value)) {
        throw validate_error("atom " + std::to_string(j + 1) + " holds a non-finite value");
      }
      out.dict.atoms(k, j) = value;
      ptr = next;
      if (k + 1 < d) {
        if (ptr == end || *ptr != ',') {
          throw parse_error("atom " + std::to_string(j + 1) + ": expected ',' after column " +
                            std::to_string(k + 1));
        }
        ++ptr;
      }
    }
    if (ptr != end) {
      throw parse_error("atom " + std::to_string(j + 1) + ": trailing characters");
    }
  }
  if (std::getline(in, line) && !line.empty()) throw parse_error("trailing content after atoms");
  return out;
}

void save_dictionary_file(const std::string& path, const Dictionary& dict, int channels,
                          int radius) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot create '" + path + "'");
  std::string text = write_dictionary(dict, channels, radius);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw io_error("write failed for '" + path + "'");
}

LoadedDictionary load_dictionary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_dictionary(text);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

}  // namespace evsc
