#include "evsc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evsc/error.hpp"
#include "evsc/rng.hpp"
#include "evsc/version.hpp"

namespace evsc {

namespace fs = std::filesystem;

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot create '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw io_error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& [label, file] : entries) {
    if (label.find(',') != std::string::npos || label.find('\n') != std::string::npos) {
      throw validate_error("label '" + label + "' cannot be stored in a manifest");
    }
    out += label + "," + file + "\n";
  }
  write_text_file(path, out);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::string text = read_text_file(path);
  std::vector<ManifestEntry> entries;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string::npos ? text.size() : eol + 1;
    ++line_no;
    if (line.empty()) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size()) {
      throw parse_error(path + ": line " + std::to_string(line_no) +
                        ": expected '<label>,<file>'");
    }
    entries.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return entries;
}

namespace {

// 9x9 glyphs with deliberately different local edge structure.
constexpr const char* kDisk[9] = {
    "..XXXXX..",
    ".XXXXXXX.",
    "XXXXXXXXX",
    "XXXXXXXXX",
    "XXXXXXXXX",
    "XXXXXXXXX",
    "XXXXXXXXX",
    ".XXXXXXX.",
    "..XXXXX..",
};
constexpr const char* kRing[9] = {
    "XXXXXXXXX",
    "XXXXXXXXX",
    "XX.....XX",
    "XX.....XX",
    "XX.....XX",
    "XX.....XX",
    "XX.....XX",
    "XXXXXXXXX",
    "XXXXXXXXX",
};
constexpr const char* kCross[9] = {
    "XX.....XX",
    "XXX...XXX",
    ".XXX.XXX.",
    "..XXXXX..",
    "...XXX...",
    "..XXXXX..",
    ".XXX.XXX.",
    "XXX...XXX",
    "XX.....XX",
};
constexpr const char* kBars[9] = {
    "XXXXXXXXX",
    "XXXXXXXXX",
    ".........",
    "XXXXXXXXX",
    "XXXXXXXXX",
    ".........",
    "XXXXXXXXX",
    "XXXXXXXXX",
    ".........",
};

Bitmap glyph_from_rows(const char* const rows[9]) {
  Bitmap bm;
  bm.width = 9;
  bm.height = 9;
  bm.mask.resize(81);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 9; ++x) bm.mask[static_cast<std::size_t>(y) * 9 + x] = rows[y][x] == 'X';
  }
  return bm;
}

constexpr const char* kLabels[4] = {"disk", "ring", "cross", "bars"};

}  // namespace

Bitmap benchmark_glyph(int index) {
  switch (((index % 4) + 4) % 4) {
    case 0: return glyph_from_rows(kDisk);
    case 1: return glyph_from_rows(kRing);
    case 2: return glyph_from_rows(kCross);
    default: return glyph_from_rows(kBars);
  }
}

std::string benchmark_label(int index) { return kLabels[((index % 4) + 4) % 4]; }

SyntheticSceneSpec benchmark_scene(const RunConfig& cfg, std::uint64_t example_seed) {
  if (cfg.direction_count != 1 && cfg.direction_count != 2 && cfg.direction_count != 4) {
    throw config_error("direction_count must be 1, 2 or 4");
  }
  Rng rng(example_seed);
  SyntheticSceneSpec spec;
  spec.seed = derive_seed(example_seed, "noise");
  spec.event_rate_per_edge_pixel = cfg.event_rate;
  spec.noise_rate = cfg.noise_rate;

  const Bitmap glyph = benchmark_glyph(0);  // extent only; caller sets the pattern
  const double travel = cfg.travel_px;
  const long long max_x = static_cast<long long>(cfg.width) - glyph.width;
  const long long max_y = static_cast<long long>(cfg.height) - glyph.height;
  if (max_x < static_cast<long long>(travel) || max_y < static_cast<long long>(travel)) {
    throw config_error("geometry too small for travel_px=" + format_double(travel));
  }

  static constexpr int kDirX[4] = {1, -1, 1, -1};
  static constexpr int kDirY[4] = {1, -1, -1, 1};
  const int dir = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.direction_count)));
  const double speed = cfg.speed_px_per_s * rng.uniform(0.9, 1.1);
  const long long slack_x = max_x - static_cast<long long>(travel);
  const long long slack_y = max_y - static_cast<long long>(travel);
  const long long jitter_x = static_cast<long long>(rng.uniform_index(static_cast<std::uint64_t>(
      std::min<long long>(slack_x, 4) + 1)));
  const long long jitter_y = static_cast<long long>(rng.uniform_index(static_cast<std::uint64_t>(
      std::min<long long>(slack_y, 4) + 1)));

  const double x0 = kDirX[dir] > 0 ? static_cast<double>(jitter_x)
                                   : static_cast<double>(max_x - jitter_x);
  const double y0 = kDirY[dir] > 0 ? static_cast<double>(jitter_y)
                                   : static_cast<double>(max_y - jitter_y);
  const double path_len = travel * std::sqrt(2.0);
  const std::uint64_t duration_us =
      static_cast<std::uint64_t>(std::llround(path_len / speed * 1e6));

  spec.trajectory = {
      Waypoint{0, x0, y0},
      Waypoint{duration_us, x0 + kDirX[dir] * travel, y0 + kDirY[dir] * travel},
  };
  return spec;
}

GenerateResult cmd_generate(const RunConfig& cfg) {
  if (cfg.classes < 1 || cfg.train_per_class < 0 || cfg.test_per_class < 0) {
    throw config_error("classes must be >= 1 and per-class counts >= 0");
  }
  fs::create_directories(cfg.out_dir);
  const Geometry geom{cfg.width, cfg.height};
  const std::uint64_t dataset_seed = derive_seed(cfg.seed, "dataset");

  GenerateResult result;
  result.dataset_dir = cfg.out_dir;
  const char* kExt = cfg.file_format == StreamFormat::kText ? ".evs" : ".evsb";
  for (int c = 0; c < cfg.classes; ++c) {
    const std::string label = benchmark_label(c);
    const Bitmap glyph = benchmark_glyph(c);
    auto emit = [&](const char* split, int i, std::vector<ManifestEntry>& entries) {
      const std::string tag = label + "-" + split + "-" + std::to_string(i);
      SyntheticSceneSpec spec = benchmark_scene(cfg, derive_seed(dataset_seed, tag));
      spec.pattern = glyph;
      EventStream stream = generate_scene(spec, geom);
      const std::string file = label + "_" + split + std::to_string(i) + kExt;
      write_events_file((fs::path(cfg.out_dir) / file).string(), stream, cfg.file_format);
      entries.emplace_back(label, file);
    };
    for (int i = 0; i < cfg.train_per_class; ++i) emit("train", i, result.train);
    for (int i = 0; i < cfg.test_per_class; ++i) emit("test", i, result.test);
  }
  write_manifest((fs::path(cfg.out_dir) / "train.manifest").string(), result.train);
  write_manifest((fs::path(cfg.out_dir) / "test.manifest").string(), result.test);
  write_text_file((fs::path(cfg.out_dir) / "run_config.txt").string(), cfg.to_key_values());
  return result;
}

namespace {

std::vector<std::pair<std::string, EventStream>> load_manifest_streams(const std::string& data_dir,
                                                                       const std::string& name) {
  const std::string manifest_path = (fs::path(data_dir) / name).string();
  std::vector<ManifestEntry> entries = read_manifest(manifest_path);
  std::vector<std::pair<std::string, EventStream>> out;
  out.reserve(entries.size());
  for (const auto& [label, file] : entries) {
    out.emplace_back(label, read_events_file((fs::path(data_dir) / file).string()));
  }
  return out;
}

std::string training_report_text(const RunConfig& cfg, const TrainedNetwork& net) {
  std::ostringstream out;
  out << "# train report v1\n";
  out << "version=" << kVersion << "\n";
  out << "# resolved configuration\n";
  out << cfg.to_key_values();
  out << "# per-sub-layer training\n";
  for (int d = 1; d <= net.depth(); ++d) {
    const TrainedLayer& layer = net.layers[static_cast<std::size_t>(d - 1)];
    auto emit = [&](const char* branch, const TrainedSubLayer& sub) {
      const std::string prefix = "layer" + std::to_string(d) + "." + branch;
      out << prefix << ".batch_size=" << sub.report.batch_size << "\n";
      out << prefix << ".sigma=" << format_double(sub.params.sigma.value_or(0)) << "\n";
      out << prefix << ".epochs_run=" << sub.report.epochs_run << "\n";
      out << prefix << ".converged=" << (sub.report.converged ? 1 : 0) << "\n";
      out << prefix << ".epoch_mean_energy=";
      for (std::size_t e = 0; e < sub.report.epoch_mean_energy.size(); ++e) {
        if (e) out << ",";
        out << format_double(sub.report.epoch_mean_energy[e]);
      }
      out << "\n";
    };
    emit("pos", layer.pos);
    if (layer.neg) emit("neg", *layer.neg);
  }
  return out.str();
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw config_error("train needs data=<dataset dir>");
  auto labeled = load_manifest_streams(cfg.data_dir, "train.manifest");
  if (labeled.empty()) throw validate_error("train manifest lists no examples");
  std::vector<EventStream> streams;
  streams.reserve(labeled.size());
  for (auto& [label, stream] : labeled) streams.push_back(std::move(stream));

  NetworkConfig ncfg = cfg.network_config();
  const auto t0 = std::chrono::steady_clock::now();
  TrainedNetwork net = train_network(streams, ncfg, cfg.seed);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  TrainResult result;
  result.wall_seconds = wall;
  result.network_dir = cfg.network_dir.empty() ? (fs::path(cfg.out_dir) / "network").string()
                                               : cfg.network_dir;
  fs::create_directories(cfg.out_dir);
  save_network(result.network_dir, net);
  result.report_path = (fs::path(cfg.out_dir) / "training_report.txt").string();
  write_text_file(result.report_path, training_report_text(cfg, net));
  // Wall time is the one non-reproducible number; it lives in the log, not
  // the report, so identical seeds rerun to identical artifacts.
  char line[128];
  std::snprintf(line, sizeof line, "trained %d layer(s) in %.2f s\n", net.depth(), wall);
  write_text_file((fs::path(cfg.out_dir) / "train.log").string(), line);
  result.net = std::move(net);
  return result;
}

namespace {

struct EncodedExample {
  std::string label;
  Signature signature;
};

std::string sublayer_key(int depth, char branch) {
  return "L" + std::to_string(depth) + branch;
}

void account_run(SpikeAccount& account, const RunResult& run) {
  account.leaf_total += run.leaf_total();
  for (const SubLayerStats& s : run.per_layer) {
    if (s.depth == 1) account.input_events += s.stats.input_events;
    const std::string key = sublayer_key(s.depth, s.branch);
    auto it = std::find_if(account.per_sublayer.begin(), account.per_sublayer.end(),
                           [&](const auto& kv) { return kv.first == key; });
    if (it == account.per_sublayer.end()) {
      account.per_sublayer.emplace_back(key, s.stats.pos_events + s.stats.neg_events);
    } else {
      it->second += s.stats.pos_events + s.stats.neg_events;
    }
  }
}

std::vector<Metric> requested_metrics(MetricChoice choice) {
  switch (choice) {
    case MetricChoice::kEuclidean: return {Metric::kEuclidean};
    case MetricChoice::kBhattacharyya: return {Metric::kBhattacharyya};
    default: return {Metric::kEuclidean, Metric::kBhattacharyya};
  }
}

const char* metric_name(Metric m) {
  return m == Metric::kEuclidean ? "euclidean" : "bhattacharyya";
}

}  // namespace

EvaluateResult cmd_evaluate(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw config_error("evaluate needs data=<dataset dir>");
  if (cfg.network_dir.empty()) throw config_error("evaluate needs network=<network dir>");
  TrainedNetwork net = load_network(cfg.network_dir);
  const int features = net.final_feature_count();

  auto encode_set = [&](const std::string& manifest, SpikeAccount* account) {
    auto labeled = load_manifest_streams(cfg.data_dir, manifest);
    std::vector<EncodedExample> out;
    out.reserve(labeled.size());
    for (const auto& [label, stream] : labeled) {
      RunResult run = run_network(stream, net);
      if (account) account_run(*account, run);
      out.push_back({label, make_signature(run.leaf_pos, run.leaf_neg, features)});
    }
    return out;
  };

  EvaluateResult result;
  std::vector<EncodedExample> train = encode_set("train.manifest", nullptr);
  std::vector<EncodedExample> test = encode_set("test.manifest", &result.test_spikes);
  if (train.empty()) throw validate_error("train manifest lists no examples");
  if (test.empty()) throw validate_error("test manifest lists no examples");

  SignatureBank bank;
  for (auto& ex : train) bank.entries.emplace_back(std::move(ex.label), std::move(ex.signature));
  fs::create_directories(cfg.out_dir);
  result.bank_path = cfg.bank_file.empty() ? (fs::path(cfg.out_dir) / "signatures.bank").string()
                                           : cfg.bank_file;
  save_signature_bank_file(result.bank_path, bank);

  std::vector<std::pair<std::string, Signature>> test_set;
  test_set.reserve(test.size());
  for (auto& ex : test) test_set.emplace_back(std::move(ex.label), std::move(ex.signature));

  std::ostringstream report;
  report << "# eval v1\n";
  report << "version=" << kVersion << "\n";
  report << "# resolved configuration\n";
  report << cfg.to_key_values();
  report << "# results\n";
  for (Metric metric : requested_metrics(cfg.metric)) {
    EvaluationReport er = evaluate(test_set, bank, metric);
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.2f", 100.0 * er.recognition_rate());
    report << "recognition_rate." << metric_name(metric) << "=" << rate << "\n";
    for (std::size_t i = 0; i < er.labels.size(); ++i) {
      report << "confusion." << metric_name(metric) << "." << er.labels[i] << "=";
      for (std::size_t j = 0; j < er.labels.size(); ++j) {
        if (j) report << ",";
        report << er.confusion[i][j];
      }
      report << "\n";
    }
    result.reports.push_back(std::move(er));
  }
  report << "# spike counts over the test set\n";
  report << "spikes.input=" << result.test_spikes.input_events << "\n";
  for (const auto& [key, count] : result.test_spikes.per_sublayer) {
    report << "spikes." << key << "=" << count << "\n";
  }
  report << "spikes.leaf_total=" << result.test_spikes.leaf_total << "\n";

  result.report_path = (fs::path(cfg.out_dir) / "evaluation_report.txt").string();
  write_text_file(result.report_path, report.str());
  return result;
}

void cmd_encode(const RunConfig& cfg) {
  if (cfg.network_dir.empty()) throw config_error("encode needs network=<network dir>");
  if (cfg.inputs.empty()) throw config_error("encode needs at least one input event file");
  TrainedNetwork net = load_network(cfg.network_dir);
  fs::create_directories(cfg.out_dir);
  std::ostringstream stats;
  for (const std::string& input : cfg.inputs) {
    EventStream stream = read_events_file(input);
    RunResult run = run_network(stream, net);
    const std::string stem = fs::path(input).stem().string();
    const char* ext = cfg.file_format == StreamFormat::kText ? ".evs" : ".evsb";
    write_events_file((fs::path(cfg.out_dir) / (stem + "_leaf_pos" + ext)).string(), run.leaf_pos,
                      cfg.file_format);
    write_events_file((fs::path(cfg.out_dir) / (stem + "_leaf_neg" + ext)).string(), run.leaf_neg,
                      cfg.file_format);
    stats << input << ": input=" << stream.events.size() << " leaf_pos=" << run.leaf_pos.events.size()
          << " leaf_neg=" << run.leaf_neg.events.size() << "\n";
    for (const SubLayerStats& s : run.per_layer) {
      stats << "  L" << s.depth << s.branch << ": in=" << s.stats.input_events
            << " pos=" << s.stats.pos_events << " neg=" << s.stats.neg_events << " coeff_hist=";
      for (std::size_t b = 0; b < s.stats.coeff_histogram.size(); ++b) {
        if (b) stats << ",";
        stats << s.stats.coeff_histogram[b];
      }
      stats << "\n";
    }
  }
  write_text_file((fs::path(cfg.out_dir) / "encode_stats.txt").string(), stats.str());
  write_text_file((fs::path(cfg.out_dir) / "run_config.txt").string(), cfg.to_key_values());
}

std::vector<std::pair<std::string, std::string>> cmd_classify(const RunConfig& cfg) {
  if (cfg.network_dir.empty()) throw config_error("classify needs network=<network dir>");
  if (cfg.bank_file.empty()) throw config_error("classify needs bank=<bank file>");
  if (cfg.inputs.empty()) throw config_error("classify needs at least one input event file");
  Metric metric = cfg.metric == MetricChoice::kBhattacharyya ? Metric::kBhattacharyya
                                                             : Metric::kEuclidean;
  TrainedNetwork net = load_network(cfg.network_dir);
  SignatureBank bank = load_signature_bank_file(cfg.bank_file);
  const int features = net.final_feature_count();

  std::vector<std::pair<std::string, std::string>> out;
  std::ostringstream text;
  for (const std::string& input : cfg.inputs) {
    EventStream stream = read_events_file(input);
    RunResult run = run_network(stream, net);
    Signature sig = make_signature(run.leaf_pos, run.leaf_neg, features);
    ClassifyResult res = classify(sig, bank, metric);
    out.emplace_back(input, res.label);
    text << input << "," << res.label << "\n";
  }
  fs::create_directories(cfg.out_dir);
  write_text_file((fs::path(cfg.out_dir) / "classification.txt").string(), text.str());
  write_text_file((fs::path(cfg.out_dir) / "run_config.txt").string(), cfg.to_key_values());
  return out;
}

SizeSelection cmd_sweep(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw config_error("sweep needs data=<dataset dir>");
  if (cfg.candidate_atom_counts.empty()) throw config_error("sweep needs candidate_atom_counts");
  auto labeled = load_manifest_streams(cfg.data_dir, "train.manifest");
  if (labeled.empty()) throw validate_error("train manifest lists no examples");

  NetworkConfig ncfg = cfg.network_config();
  const LayerConfig& layer1 = ncfg.layers[0];
  Reservoir<Eigen::VectorXd> sample(cfg.max_train_surfaces, derive_seed(cfg.seed, "sweep-sample"));
  for (const auto& [label, stream] : labeled) {
    for_each_surface(stream, layer1.radius, layer1.tau_us,
                     [&](const Eigen::VectorXd& surf) { sample.offer(surf); });
  }
  if (sample.items().empty()) throw validate_error("no surfaces collected from the train manifest");

  SizeSelection sel = select_dictionary_size(sample.take(), cfg.candidate_atom_counts, cfg.sparse,
                                             derive_seed(cfg.seed, "sweep"));
  std::ostringstream out;
  out << "# sweep v1\n";
  out << "version=" << kVersion << "\n";
  out << "# resolved configuration\n";
  out << cfg.to_key_values();
  out << "# mean reconstruction error per candidate\n";
  for (const SizeCandidate& c : sel.table) {
    out << "error.n" << c.atom_count << "=" << format_double(c.mean_reconstruction_error) << "\n";
  }
  out << "best_atom_count=" << sel.best_atom_count << "\n";
  fs::create_directories(cfg.out_dir);
  write_text_file((fs::path(cfg.out_dir) / "sweep_report.txt").string(), out.str());
  return sel;
}

}  // namespace evsc
