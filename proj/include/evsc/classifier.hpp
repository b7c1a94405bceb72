#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evsc/events.hpp"

namespace evsc {

/// Per-sub-layer histogram of leaf feature responses: entry j-1 counts leaf
/// events with p == j. Position and time are ignored.
struct Signature {
  std::vector<std::uint64_t> pos_counts;
  std::vector<std::uint64_t> neg_counts;

  std::uint64_t pos_total() const;
  std::uint64_t neg_total() const;
  bool operator==(const Signature&) const = default;
};

Signature make_signature(const EventStream& leaf_pos, const EventStream& leaf_neg, int feature_count);

/// One labeled training example per entry (1-nearest-neighbor bank, not
/// class centroids).
struct SignatureBank {
  std::vector<std::pair<std::string, Signature>> entries;
};

enum class Metric { kEuclidean, kBhattacharyya };

double euclidean_distance(const std::vector<std::uint64_t>& h1, const std::vector<std::uint64_t>& h2);

/// -ln of the Bhattacharyya coefficient between count-normalized histograms.
/// The coefficient is clamped to [1e-300, 1] so disjoint supports yield a
/// large finite distance instead of infinity. Throws on a zero-total
/// histogram.
double bhattacharyya_distance(const std::vector<std::uint64_t>& h1, const std::vector<std::uint64_t>& h2);

double signature_distance(const std::vector<std::uint64_t>& h1, const std::vector<std::uint64_t>& h2,
                          Metric metric);

struct SubLayerVote {
  char sublayer = '+';
  std::size_t bank_index = 0;
  std::string label;
  double distance = 0;
};

struct ClassifyResult {
  std::string label;
  std::vector<SubLayerVote> votes;
};

/// Nearest bank signature per sub-layer, then a majority vote; a split vote
/// is broken by the smaller summed distance across sub-layers to the voted
/// example, then by label order. Sub-layers that are structurally absent
/// (zero-total in the test signature and in every bank entry, as depth-1
/// networks produce) cast no vote.
ClassifyResult classify(const Signature& test, const SignatureBank& bank, Metric metric);

struct EvaluationReport {
  Metric metric = Metric::kEuclidean;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::vector<std::string> labels;                 // sorted, unique
  std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]

  double recognition_rate() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

EvaluationReport evaluate(const std::vector<std::pair<std::string, Signature>>& test_set,
                          const SignatureBank& bank, Metric metric);

/// Bank file: one line per example, "<label>;<pos counts>;<neg counts>".
std::string write_signature_bank(const SignatureBank& bank);
SignatureBank parse_signature_bank(std::string_view text);
void save_signature_bank_file(const std::string& path, const SignatureBank& bank);
SignatureBank load_signature_bank_file(const std::string& path);

}  // namespace evsc
