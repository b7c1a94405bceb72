#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evsc/classifier.hpp"
#include "evsc/config.hpp"
#include "evsc/hierarchy.hpp"
#include "evsc/sparse_coding.hpp"

namespace evsc {

/// label -> event-file path, relative to the manifest's directory.
using ManifestEntry = std::pair<std::string, std::string>;

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

/// The built-in glyph set used by the synthetic benchmark (disk, ring,
/// cross, bars). `index` wraps modulo the set size.
Bitmap benchmark_glyph(int index);
std::string benchmark_label(int index);

/// Scene spec for one dataset example; deterministic in (config, seed).
SyntheticSceneSpec benchmark_scene(const RunConfig& cfg, std::uint64_t example_seed);

struct GenerateResult {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
  std::string dataset_dir;
};

/// Writes one event file per example plus train/test manifests and the
/// resolved config under cfg.out_dir.
GenerateResult cmd_generate(const RunConfig& cfg);

struct TrainResult {
  TrainedNetwork net;
  std::string network_dir;
  std::string report_path;
  double wall_seconds = 0;
};

/// Trains the configured network on the train manifest under cfg.data_dir
/// and writes the network directory plus a deterministic training report;
/// wall time goes to train.log only so reruns stay byte-identical.
TrainResult cmd_train(const RunConfig& cfg);

struct SpikeAccount {
  std::uint64_t input_events = 0;
  std::vector<std::pair<std::string, std::uint64_t>> per_sublayer;  // "L2+" -> emitted
  std::uint64_t leaf_total = 0;
};

struct EvaluateResult {
  std::vector<EvaluationReport> reports;  // one per requested metric
  SpikeAccount test_spikes;
  std::string bank_path;
  std::string report_path;
};

/// Builds the signature bank from the train manifest, classifies the test
/// manifest under the requested metric(s), writes the bank and report.
EvaluateResult cmd_evaluate(const RunConfig& cfg);

/// Runs each input event file through the network and writes the two leaf
/// streams per input plus an encode_stats.txt summary.
void cmd_encode(const RunConfig& cfg);

/// Classifies each input event file against the bank; returns and writes
/// (path, label) pairs.
std::vector<std::pair<std::string, std::string>> cmd_classify(const RunConfig& cfg);

/// Dictionary-size sweep over layer-1 surfaces of the train manifest.
SizeSelection cmd_sweep(const RunConfig& cfg);

}  // namespace evsc
