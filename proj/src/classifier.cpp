#include "evsc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "evsc/error.hpp"

namespace evsc {

namespace {

std::uint64_t sum_counts(const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (std::uint64_t c : counts) total += c;
  return total;
}

}  // namespace

std::uint64_t Signature::pos_total() const { return sum_counts(pos_counts); }
std::uint64_t Signature::neg_total() const { return sum_counts(neg_counts); }

Signature make_signature(const EventStream& leaf_pos, const EventStream& leaf_neg,
                         int feature_count) {
  if (feature_count < 1) throw config_error("feature count must be >= 1");
  for (const EventStream* s : {&leaf_pos, &leaf_neg}) {
    if (s->channel_count != feature_count) {
      throw dimension_error("leaf stream declares " + std::to_string(s->channel_count) +
                            " channels, expected " + std::to_string(feature_count));
    }
  }
  Signature sig;
  sig.pos_counts.assign(static_cast<std::size_t>(feature_count), 0);
  sig.neg_counts.assign(static_cast<std::size_t>(feature_count), 0);
  auto tally = [feature_count](const EventStream& s, std::vector<std::uint64_t>& counts) {
    for (const Event& ev : s.events) {
      if (ev.p < 1 || ev.p > feature_count) {
        throw validate_error("leaf event channel " + std::to_string(ev.p) + " out of range [1," +
                             std::to_string(feature_count) + "]");
      }
      ++counts[static_cast<std::size_t>(ev.p - 1)];
    }
  };
  tally(leaf_pos, sig.pos_counts);
  tally(leaf_neg, sig.neg_counts);
  return sig;
}

double euclidean_distance(const std::vector<std::uint64_t>& h1,
                          const std::vector<std::uint64_t>& h2) {
  if (h1.size() != h2.size()) throw dimension_error("histogram lengths differ");
  double sum = 0;
  for (std::size_t j = 0; j < h1.size(); ++j) {
    double d = static_cast<double>(h1[j]) - static_cast<double>(h2[j]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

double bhattacharyya_distance(const std::vector<std::uint64_t>& h1,
                              const std::vector<std::uint64_t>& h2) {
  if (h1.size() != h2.size()) throw dimension_error("histogram lengths differ");
  const double t1 = static_cast<double>(sum_counts(h1));
  const double t2 = static_cast<double>(sum_counts(h2));
  if (t1 <= 0 || t2 <= 0) throw validate_error("bhattacharyya distance needs non-empty histograms");
  double coeff = 0;
  for (std::size_t j = 0; j < h1.size(); ++j) {
    coeff += std::sqrt((static_cast<double>(h1[j]) / t1) * (static_cast<double>(h2[j]) / t2));
  }
  // Disjoint supports give coefficient 0; clamp so nearest-neighbor search
  // never compares infinities.
  coeff = std::min(1.0, std::max(coeff, 1e-300));
  return -std::log(coeff);
}

double signature_distance(const std::vector<std::uint64_t>& h1, const std::vector<std::uint64_t>& h2,
                          Metric metric) {
  return metric == Metric::kEuclidean ? euclidean_distance(h1, h2) : bhattacharyya_distance(h1, h2);
}

ClassifyResult classify(const Signature& test, const SignatureBank& bank, Metric metric) {
  if (bank.entries.empty()) throw validate_error("signature bank is empty");

  ClassifyResult result;
  for (char sublayer : {'+', '-'}) {
    auto histogram_of = [sublayer](const Signature& s) -> const std::vector<std::uint64_t>& {
      return sublayer == '+' ? s.pos_counts : s.neg_counts;
    };
    const std::vector<std::uint64_t>& test_h = histogram_of(test);
    // A sub-layer that is empty in the test signature and every bank entry
    // is structurally absent (depth-1 networks); it casts no vote.
    bool all_empty = sum_counts(test_h) == 0;
    for (const auto& [label, sig] : bank.entries) {
      if (!all_empty) break;
      all_empty = sum_counts(histogram_of(sig)) == 0;
    }
    if (all_empty) continue;

    SubLayerVote vote;
    vote.sublayer = sublayer;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bank.entries.size(); ++i) {
      double d = signature_distance(test_h, histogram_of(bank.entries[i].second), metric);
      if (d < best) {
        best = d;
        vote.bank_index = i;
        vote.label = bank.entries[i].first;
        vote.distance = d;
      }
    }
    result.votes.push_back(std::move(vote));
  }

  if (result.votes.empty()) {
    throw validate_error("no usable sub-layer histograms to classify with");
  }

  // Majority over sub-layer votes.
  std::map<std::string, int> tally;
  for (const SubLayerVote& v : result.votes) ++tally[v.label];
  int best_count = 0;
  for (const auto& [label, count] : tally) best_count = std::max(best_count, count);

  // Split vote: smaller summed distance across sub-layers to the voted
  // example wins, then label order.
  std::string best_label;
  double best_sum = std::numeric_limits<double>::infinity();
  for (const SubLayerVote& v : result.votes) {
    if (tally[v.label] != best_count) continue;
    double sum = 0;
    const Signature& candidate = bank.entries[v.bank_index].second;
    for (const SubLayerVote& other : result.votes) {
      const auto& test_h = other.sublayer == '+' ? test.pos_counts : test.neg_counts;
      const auto& cand_h = other.sublayer == '+' ? candidate.pos_counts : candidate.neg_counts;
      sum += signature_distance(test_h, cand_h, metric);
    }
    if (sum < best_sum || (sum == best_sum && v.label < best_label)) {
      best_sum = sum;
      best_label = v.label;
    }
  }
  result.label = best_label;
  return result;
}

EvaluationReport evaluate(const std::vector<std::pair<std::string, Signature>>& test_set,
                          const SignatureBank& bank, Metric metric) {
  if (test_set.empty()) throw validate_error("test set is empty");
  EvaluationReport report;
  report.metric = metric;
  for (const auto& [label, sig] : bank.entries) report.labels.push_back(label);
  for (const auto& [label, sig] : test_set) report.labels.push_back(label);
  std::sort(report.labels.begin(), report.labels.end());
  report.labels.erase(std::unique(report.labels.begin(), report.labels.end()), report.labels.end());
  const std::size_t k = report.labels.size();
  report.confusion.assign(k, std::vector<std::uint64_t>(k, 0));
  auto label_index = [&](const std::string& label) {
    return static_cast<std::size_t>(
        std::lower_bound(report.labels.begin(), report.labels.end(), label) -
        report.labels.begin());
  };
  for (const auto& [truth, sig] : test_set) {
    ClassifyResult res = classify(sig, bank, metric);
    ++report.confusion[label_index(truth)][label_index(res.label)];
    ++report.total;
    if (res.label == truth) ++report.correct;
  }
  return report;
}

std::string write_signature_bank(const SignatureBank& bank) {
  std::string out;
  auto append_counts = [&out](const std::vector<std::uint64_t>& counts) {
    for (std::size_t j = 0; j < counts.size(); ++j) {
      if (j > 0) out.push_back(',');
      out += std::to_string(counts[j]);
    }
  };
  for (const auto& [label, sig] : bank.entries) {
    if (label.empty() || label.find(';') != std::string::npos ||
        label.find('\n') != std::string::npos) {
      throw validate_error("label '" + label + "' cannot be stored in a bank file");
    }
    out += label;
    out.push_back(';');
    append_counts(sig.pos_counts);
    out.push_back(';');
    append_counts(sig.neg_counts);
    out.push_back('\n');
  }
  return out;
}

SignatureBank parse_signature_bank(std::string_view text) {
  SignatureBank bank;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto parse_counts = [](std::string_view field, std::size_t line) {
    std::vector<std::uint64_t> counts;
    if (field.empty()) return counts;
    std::size_t start = 0;
    while (start <= field.size()) {
      std::size_t comma = field.find(',', start);
      std::string tok{field.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                          : comma - start)};
      try {
        std::size_t used = 0;
        unsigned long long v = std::stoull(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        counts.push_back(v);
      } catch (const std::exception&) {
        throw parse_error("line " + std::to_string(line) + ": bad count '" + tok + "'");
      }
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return counts;
  };
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (line.empty()) continue;
    std::size_t first = line.find(';');
    std::size_t second = first == std::string_view::npos ? std::string_view::npos
                                                         : line.find(';', first + 1);
    if (first == std::string_view::npos || second == std::string_view::npos) {
      throw parse_error("line " + std::to_string(line_no) +
                        ": expected '<label>;<pos counts>;<neg counts>'");
    }
    Signature sig;
    std::string label{line.substr(0, first)};
    if (label.empty()) throw parse_error("line " + std::to_string(line_no) + ": empty label");
    sig.pos_counts = parse_counts(line.substr(first + 1, second - first - 1), line_no);
    sig.neg_counts = parse_counts(line.substr(second + 1), line_no);
    if (!bank.entries.empty()) {
      const Signature& ref = bank.entries.front().second;
      if (sig.pos_counts.size() != ref.pos_counts.size() ||
          sig.neg_counts.size() != ref.neg_counts.size()) {
        throw parse_error("line " + std::to_string(line_no) +
                          ": histogram lengths differ from earlier entries");
      }
    }
    bank.entries.emplace_back(std::move(label), std::move(sig));
  }
  return bank;
}

void save_signature_bank_file(const std::string& path, const SignatureBank& bank) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot create '" + path + "'");
  std::string text = write_signature_bank(bank);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw io_error("write failed for '" + path + "'");
}

SignatureBank load_signature_bank_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_signature_bank(text);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

}  // namespace evsc
