#include "evsc/config.hpp"

#include <sstream>

#include "evsc/error.hpp"

namespace evsc {

MetricChoice parse_metric_choice(const std::string& name) {
  if (name == "euclidean") return MetricChoice::kEuclidean;
  if (name == "bhattacharyya") return MetricChoice::kBhattacharyya;
  if (name == "both") return MetricChoice::kBoth;
  throw config_error("metric must be euclidean, bhattacharyya or both, got '" + name + "'");
}

std::string metric_choice_name(MetricChoice m) {
  switch (m) {
    case MetricChoice::kEuclidean: return "euclidean";
    case MetricChoice::kBhattacharyya: return "bhattacharyya";
    default: return "both";
  }
}

NetworkConfig RunConfig::network_config() const {
  NetworkConfig config;
  config.input_channels = 2;
  config.max_train_surfaces = max_train_surfaces;
  if (geometric) {
    LayerConfig init;
    init.tau_us = tau0_us;
    init.radius = radius0;
    init.atom_count = atoms0;
    init.alpha_us = 0;
    init.sparse = sparse;
    config = evolve_config(init, EvolutionFactors{k_tau, k_radius, k_atoms}, depth);
    config.input_channels = 2;
    config.max_train_surfaces = max_train_surfaces;
    return config;
  }
  if (taus_us.size() != static_cast<std::size_t>(depth) ||
      radii.size() != static_cast<std::size_t>(depth) ||
      atom_counts.size() != static_cast<std::size_t>(depth)) {
    throw config_error("taus_us, radii and atom_counts must each list one value per layer (depth " +
                       std::to_string(depth) + ")");
  }
  if (!alphas_us.empty() && alphas_us.size() != static_cast<std::size_t>(depth)) {
    throw config_error("alphas_us must be empty or list one value per layer");
  }
  for (int i = 0; i < depth; ++i) {
    LayerConfig layer;
    layer.tau_us = taus_us[static_cast<std::size_t>(i)];
    layer.radius = radii[static_cast<std::size_t>(i)];
    layer.atom_count = atom_counts[static_cast<std::size_t>(i)];
    layer.alpha_us = alphas_us.empty() ? 0 : alphas_us[static_cast<std::size_t>(i)];
    layer.sparse = sparse;
    config.layers.push_back(layer);
  }
  apply_default_alpha(config);
  config.validate();
  return config;
}

std::string RunConfig::to_key_values() const {
  std::ostringstream out;
  out << "seed=" << seed << "\n";
  out << "out=" << out_dir << "\n";
  if (!data_dir.empty()) out << "data=" << data_dir << "\n";
  if (!network_dir.empty()) out << "network=" << network_dir << "\n";
  if (!bank_file.empty()) out << "bank=" << bank_file << "\n";
  out << "width=" << width << "\n";
  out << "height=" << height << "\n";
  out << "classes=" << classes << "\n";
  out << "train_per_class=" << train_per_class << "\n";
  out << "test_per_class=" << test_per_class << "\n";
  out << "noise_rate=" << format_double(noise_rate) << "\n";
  out << "event_rate=" << format_double(event_rate) << "\n";
  out << "speed_px_per_s=" << format_double(speed_px_per_s) << "\n";
  out << "travel_px=" << format_double(travel_px) << "\n";
  out << "direction_count=" << direction_count << "\n";
  out << "format=" << (file_format == StreamFormat::kText ? "text" : "binary") << "\n";
  out << "depth=" << depth << "\n";
  out << "geometric=" << (geometric ? 1 : 0) << "\n";
  if (geometric) {
    out << "tau0_us=" << format_double(tau0_us) << "\n";
    out << "radius0=" << radius0 << "\n";
    out << "atoms0=" << atoms0 << "\n";
    out << "k_tau=" << format_double(k_tau) << "\n";
    out << "k_radius=" << format_double(k_radius) << "\n";
    out << "k_atoms=" << format_double(k_atoms) << "\n";
  } else {
    auto join = [&out](const char* key, auto&& values, auto&& fmt) {
      out << key << "=";
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ",";
        out << fmt(values[i]);
      }
      out << "\n";
    };
    join("taus_us", taus_us, [](double v) { return format_double(v); });
    join("radii", radii, [](int v) { return std::to_string(v); });
    join("atom_counts", atom_counts, [](int v) { return std::to_string(v); });
    if (!alphas_us.empty()) {
      join("alphas_us", alphas_us, [](std::uint64_t v) { return std::to_string(v); });
    }
  }
  out << "lambda=" << format_double(sparse.lambda) << "\n";
  if (sparse.sigma) out << "sigma=" << format_double(*sparse.sigma) << "\n";
  out << "eta=" << format_double(sparse.eta) << "\n";
  out << "eps_smooth=" << format_double(sparse.eps_smooth) << "\n";
  out << "max_cg_iters=" << sparse.max_cg_iters << "\n";
  out << "cg_tol=" << format_double(sparse.cg_tol) << "\n";
  out << "epochs_max=" << sparse.epochs_max << "\n";
  out << "epoch_tol=" << format_double(sparse.epoch_tol) << "\n";
  out << "max_train_surfaces=" << max_train_surfaces << "\n";
  out << "metric=" << metric_choice_name(metric) << "\n";
  out << "candidate_atom_counts=";
  for (std::size_t i = 0; i < candidate_atom_counts.size(); ++i) {
    if (i) out << ",";
    out << candidate_atom_counts[i];
  }
  out << "\n";
  return out.str();
}

namespace {

template <typename T>
std::vector<T> to_vector(const std::vector<std::int64_t>& in, const char* key) {
  std::vector<T> out;
  for (std::int64_t v : in) {
    if (v < 0) throw config_error(std::string("key '") + key + "': negative value");
    out.push_back(static_cast<T>(v));
  }
  return out;
}

}  // namespace

RunConfig config_from_kv(const KeyValues& kv) {
  RunConfig cfg;
  cfg.seed = kv_u64_or(kv, "seed", cfg.seed);
  cfg.out_dir = kv_string_or(kv, "out", cfg.out_dir);
  cfg.data_dir = kv_string_or(kv, "data", cfg.data_dir);
  cfg.network_dir = kv_string_or(kv, "network", cfg.network_dir);
  cfg.bank_file = kv_string_or(kv, "bank", cfg.bank_file);
  if (kv_has(kv, "in")) {
    cfg.inputs.clear();
    std::string value = kv_string(kv, "in");
    std::size_t pos = 0;
    while (pos <= value.size()) {
      std::size_t comma = value.find(',', pos);
      cfg.inputs.push_back(value.substr(pos, comma == std::string::npos ? std::string::npos
                                                                        : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  cfg.width = static_cast<std::uint16_t>(kv_u64_or(kv, "width", cfg.width));
  cfg.height = static_cast<std::uint16_t>(kv_u64_or(kv, "height", cfg.height));
  cfg.classes = static_cast<int>(kv_int_or(kv, "classes", cfg.classes));
  cfg.train_per_class = static_cast<int>(kv_int_or(kv, "train_per_class", cfg.train_per_class));
  cfg.test_per_class = static_cast<int>(kv_int_or(kv, "test_per_class", cfg.test_per_class));
  cfg.noise_rate = kv_double_or(kv, "noise_rate", cfg.noise_rate);
  cfg.event_rate = kv_double_or(kv, "event_rate", cfg.event_rate);
  cfg.speed_px_per_s = kv_double_or(kv, "speed_px_per_s", cfg.speed_px_per_s);
  cfg.travel_px = kv_double_or(kv, "travel_px", cfg.travel_px);
  cfg.direction_count = static_cast<int>(kv_int_or(kv, "direction_count", cfg.direction_count));
  std::string format = kv_string_or(kv, "format", "text");
  if (format == "text") {
    cfg.file_format = StreamFormat::kText;
  } else if (format == "binary") {
    cfg.file_format = StreamFormat::kBinary;
  } else {
    throw config_error("format must be text or binary, got '" + format + "'");
  }
  cfg.depth = static_cast<int>(kv_int_or(kv, "depth", cfg.depth));
  cfg.geometric = kv_int_or(kv, "geometric", cfg.geometric ? 1 : 0) != 0;
  if (kv_has(kv, "taus_us")) cfg.taus_us = kv_double_list(kv, "taus_us");
  if (kv_has(kv, "radii")) cfg.radii = to_vector<int>(kv_int_list(kv, "radii"), "radii");
  if (kv_has(kv, "atom_counts")) {
    cfg.atom_counts = to_vector<int>(kv_int_list(kv, "atom_counts"), "atom_counts");
  }
  if (kv_has(kv, "alphas_us")) {
    cfg.alphas_us = to_vector<std::uint64_t>(kv_int_list(kv, "alphas_us"), "alphas_us");
  }
  // Explicit lists define the depth unless the geometric rule is requested.
  if (!cfg.geometric && kv_has(kv, "atom_counts") && !kv_has(kv, "depth")) {
    cfg.depth = static_cast<int>(cfg.atom_counts.size());
  }
  cfg.tau0_us = kv_double_or(kv, "tau0_us", cfg.tau0_us);
  cfg.radius0 = static_cast<int>(kv_int_or(kv, "radius0", cfg.radius0));
  cfg.atoms0 = static_cast<int>(kv_int_or(kv, "atoms0", cfg.atoms0));
  cfg.k_tau = kv_double_or(kv, "k_tau", cfg.k_tau);
  cfg.k_radius = kv_double_or(kv, "k_radius", cfg.k_radius);
  cfg.k_atoms = kv_double_or(kv, "k_atoms", cfg.k_atoms);
  cfg.sparse.lambda = kv_double_or(kv, "lambda", cfg.sparse.lambda);
  if (kv_has(kv, "sigma")) cfg.sparse.sigma = kv_double(kv, "sigma");
  cfg.sparse.eta = kv_double_or(kv, "eta", cfg.sparse.eta);
  cfg.sparse.eps_smooth = kv_double_or(kv, "eps_smooth", cfg.sparse.eps_smooth);
  cfg.sparse.max_cg_iters = static_cast<int>(kv_int_or(kv, "max_cg_iters", cfg.sparse.max_cg_iters));
  cfg.sparse.cg_tol = kv_double_or(kv, "cg_tol", cfg.sparse.cg_tol);
  cfg.sparse.epochs_max = static_cast<int>(kv_int_or(kv, "epochs_max", cfg.sparse.epochs_max));
  cfg.sparse.epoch_tol = kv_double_or(kv, "epoch_tol", cfg.sparse.epoch_tol);
  cfg.max_train_surfaces = kv_u64_or(kv, "max_train_surfaces", cfg.max_train_surfaces);
  cfg.metric = parse_metric_choice(kv_string_or(kv, "metric", metric_choice_name(cfg.metric)));
  if (kv_has(kv, "candidate_atom_counts")) {
    cfg.candidate_atom_counts =
        to_vector<int>(kv_int_list(kv, "candidate_atom_counts"), "candidate_atom_counts");
  }
  return cfg;
}

}  // namespace evsc
