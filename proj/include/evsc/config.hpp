#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evsc/classifier.hpp"
#include "evsc/events.hpp"
#include "evsc/hierarchy.hpp"
#include "evsc/kv.hpp"

namespace evsc {

enum class MetricChoice { kEuclidean, kBhattacharyya, kBoth };

MetricChoice parse_metric_choice(const std::string& name);
std::string metric_choice_name(MetricChoice m);

/// Fully resolved run configuration: defaults, then config-file keys, then
/// flag overrides (flags win). Every output artifact embeds the resolved
/// form so runs can be reproduced from any artifact.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string data_dir;       // dataset dir holding the manifests
  std::string network_dir;    // trained network location
  std::string bank_file;      // signature bank
  std::vector<std::string> inputs;  // event files for encode/classify

  // dataset generation
  std::uint16_t width = 32;
  std::uint16_t height = 32;
  int classes = 4;
  int train_per_class = 7;
  int test_per_class = 3;
  double noise_rate = 0.05;        // events per pixel per second
  double event_rate = 1.0;         // events per mask transition
  double speed_px_per_s = 60.0;
  double travel_px = 18.0;
  int direction_count = 2;         // 1, 2 or 4 sweep directions
  StreamFormat file_format = StreamFormat::kText;

  // network: explicit per-layer lists win over the geometric rule
  int depth = 3;
  std::vector<double> taus_us = {10000, 15000, 20000};
  std::vector<int> radii = {2, 2, 2};
  std::vector<int> atom_counts = {6, 9, 12};
  std::vector<std::uint64_t> alphas_us;  // empty: alpha defaults to the next layer's tau
  double tau0_us = 10000;
  int radius0 = 2;
  int atoms0 = 6;
  double k_tau = 1.0;
  double k_radius = 1.0;
  double k_atoms = 1.0;
  bool geometric = false;

  SparseParams sparse;
  std::size_t max_train_surfaces = 6000;

  MetricChoice metric = MetricChoice::kBoth;
  std::vector<int> candidate_atom_counts = {2, 4, 8};

  NetworkConfig network_config() const;
  std::string to_key_values() const;  // deterministic resolved echo
};

RunConfig config_from_kv(const KeyValues& kv);

}  // namespace evsc
