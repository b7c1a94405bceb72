#include "evsc/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "evsc/error.hpp"
#include "evsc/kv.hpp"
#include "evsc/rng.hpp"
#include "evsc/version.hpp"

namespace evsc {

namespace fs = std::filesystem;

void LayerConfig::validate() const {
  if (!(tau_us > 0)) throw config_error("layer tau must be > 0");
  if (radius < 1) throw config_error("layer radius must be >= 1");
  if (atom_count < 1) throw config_error("layer atom count must be >= 1");
  if (atom_count > 32767) throw config_error("layer atom count exceeds the event channel range");
  sparse.validate();
}

void NetworkConfig::validate() const {
  if (layers.empty()) throw config_error("network needs at least one layer");
  if (input_channels < 1) throw config_error("input channel count must be >= 1");
  if (max_train_surfaces < 1) throw config_error("max_train_surfaces must be >= 1");
  for (const LayerConfig& layer : layers) layer.validate();
}

NetworkConfig evolve_config(const LayerConfig& init, const EvolutionFactors& factors, int depth) {
  if (depth < 1) throw config_error("network depth must be >= 1");
  if (factors.k_tau < 1 || factors.k_radius < 1 || factors.k_atoms < 1) {
    throw config_error("evolution factors must be >= 1");
  }
  init.validate();
  NetworkConfig config;
  config.layers.push_back(init);
  for (int i = 1; i < depth; ++i) {
    const LayerConfig& prev = config.layers.back();
    LayerConfig next = prev;
    next.tau_us = factors.k_tau * prev.tau_us;
    next.radius = std::max(1, static_cast<int>(std::llround(factors.k_radius * prev.radius)));
    next.atom_count = std::max(1, static_cast<int>(std::llround(factors.k_atoms * prev.atom_count)));
    next.alpha_us = 0;  // filled by apply_default_alpha
    config.layers.push_back(next);
  }
  apply_default_alpha(config);
  config.validate();
  return config;
}

void apply_default_alpha(NetworkConfig& config) {
  const int depth = config.depth();
  for (int i = 0; i < depth; ++i) {
    if (config.layers[i].alpha_us != 0) continue;
    const double consumer_tau =
        i + 1 < depth ? config.layers[i + 1].tau_us : config.layers[i].tau_us;
    config.layers[i].alpha_us = static_cast<std::uint64_t>(std::llround(consumer_tau));
  }
}

EventStream normalize_sensor_channels(const EventStream& stream) {
  if (stream.semantics == ChannelSemantics::kLayer) return stream;
  EventStream out = stream;
  out.semantics = ChannelSemantics::kLayer;
  out.channel_count = 2;
  for (Event& ev : out.events) ev.p = ev.p == -1 ? 1 : 2;
  return out;
}

namespace {

inline std::int16_t mapped_channel(const EventStream& stream, std::int16_t p) {
  if (stream.semantics == ChannelSemantics::kSensor) return p == -1 ? 1 : 2;
  return p;
}

void check_layer_input(const EventStream& input, const Dictionary& dict, const LayerConfig& cfg) {
  const std::size_t side = 2 * static_cast<std::size_t>(cfg.radius) + 1;
  const std::size_t dim = input.channel_count * side * side;
  if (static_cast<std::size_t>(dict.dim()) != dim) {
    throw dimension_error("dictionary dimension " + std::to_string(dict.dim()) +
                          " does not match " + std::to_string(input.channel_count) +
                          " channels x (2*" + std::to_string(cfg.radius) + "+1)^2 = " +
                          std::to_string(dim));
  }
}

}  // namespace

void regenerate_events(const Event& input, const Eigen::VectorXd& coeffs, std::uint64_t alpha_us,
                       std::vector<Event>& pos_out, std::vector<Event>& neg_out) {
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    const double a = coeffs[j];
    const double similarity = std::min(std::abs(a), 1.0);  // coefficients live in [-1, 1]
    const std::uint64_t delay =
        static_cast<std::uint64_t>(std::llround(static_cast<double>(alpha_us) * (1.0 - similarity)));
    Event out{input.t + delay, input.x, input.y, static_cast<std::int16_t>(j + 1)};
    (a >= 0 ? pos_out : neg_out).push_back(out);
  }
}

void for_each_surface(const EventStream& input, int radius, double tau_us,
                      const std::function<void(const Eigen::VectorXd&)>& sink) {
  TimestampMap map(input.width, input.height, input.channel_count);
  Eigen::VectorXd buf(TimestampMap::surface_dim(input.channel_count, radius));
  for (const Event& ev : input.events) {
    Event evc = ev;
    evc.p = mapped_channel(input, ev.p);
    map.record(evc);
    map.surface_into(evc, radius, tau_us, std::span<double>(buf.data(), buf.size()));
    sink(buf);
  }
}

EncodeResult encode_layer(const EventStream& input, const Dictionary& dict, const LayerConfig& cfg) {
  cfg.validate();
  check_layer_input(input, dict, cfg);
  const int n = dict.atom_count();

  EncodeResult result;
  result.stats.input_events = input.events.size();

  CoefficientSolver solver(dict, cfg.sparse);
  TimestampMap map(input.width, input.height, input.channel_count);
  Eigen::VectorXd buf(dict.dim());
  std::vector<Event>& pos = result.pos.events;
  std::vector<Event>& neg = result.neg.events;
  pos.reserve(input.events.size());
  neg.reserve(input.events.size());

  for (const Event& ev : input.events) {
    Event evc = ev;
    evc.p = mapped_channel(input, ev.p);
    map.record(evc);
    map.surface_into(evc, cfg.radius, cfg.tau_us, std::span<double>(buf.data(), buf.size()));
    InferenceResult res = solver.infer(buf);
    for (Eigen::Index j = 0; j < res.coeffs.size(); ++j) {
      int bin = static_cast<int>((res.coeffs[j] + 1.0) * 0.5 * kCoeffHistogramBins);
      bin = std::clamp(bin, 0, kCoeffHistogramBins - 1);
      ++result.stats.coeff_histogram[static_cast<std::size_t>(bin)];
    }
    regenerate_events(evc, res.coeffs, cfg.alpha_us, pos, neg);
  }

  // Events were appended in (input sequence, atom) order, so a stable sort
  // by time yields the (t, sequence, atom) order the next layer consumes.
  auto by_time = [](const Event& a, const Event& b) { return a.t < b.t; };
  std::stable_sort(pos.begin(), pos.end(), by_time);
  std::stable_sort(neg.begin(), neg.end(), by_time);

  for (EventStream* s : {&result.pos, &result.neg}) {
    s->width = input.width;
    s->height = input.height;
    s->channel_count = static_cast<std::uint16_t>(n);
    s->semantics = ChannelSemantics::kLayer;
  }
  result.stats.pos_events = pos.size();
  result.stats.neg_events = neg.size();
  return result;
}

namespace {

EventStream merge_streams(const EventStream& a, const EventStream& b, int offset,
                          std::uint16_t channel_count) {
  if (a.width != b.width || a.height != b.height) {
    throw validate_error("cannot merge streams with different geometries");
  }
  EventStream out;
  out.width = a.width;
  out.height = a.height;
  out.channel_count = channel_count;
  out.semantics = ChannelSemantics::kLayer;
  out.events.reserve(a.events.size() + b.events.size());
  std::vector<Event> b_shifted;
  const std::vector<Event>* b_events = &b.events;
  if (offset != 0) {
    b_shifted = b.events;
    for (Event& ev : b_shifted) ev.p = static_cast<std::int16_t>(ev.p + offset);
    b_events = &b_shifted;
  }
  std::merge(a.events.begin(), a.events.end(), b_events->begin(), b_events->end(),
             std::back_inserter(out.events),
             [](const Event& x, const Event& y) { return x.t < y.t; });
  return out;
}

}  // namespace

std::pair<EventStream, EventStream> merge_signed(const EventStream& pos_a, const EventStream& neg_a,
                                                 const EventStream& pos_b, const EventStream& neg_b,
                                                 int atom_count) {
  if (atom_count < 1 || 2 * atom_count > 32767) {
    throw config_error("merged channel count out of range");
  }
  for (const EventStream* s : {&pos_a, &neg_a, &pos_b, &neg_b}) {
    if (s->channel_count != atom_count) {
      throw dimension_error("sub-layer stream declares " + std::to_string(s->channel_count) +
                            " channels, expected " + std::to_string(atom_count));
    }
  }
  const std::uint16_t merged_channels = static_cast<std::uint16_t>(2 * atom_count);
  return {merge_streams(pos_a, pos_b, atom_count, merged_channels),
          merge_streams(neg_a, neg_b, atom_count, merged_channels)};
}

int TrainedNetwork::final_feature_count() const {
  if (layers.empty()) return 0;
  const int n_last = layers.back().cfg.atom_count;
  return depth() > 1 ? 2 * n_last : n_last;
}

namespace {

LayerConfig encode_cfg(const TrainedLayer& layer, bool positive) {
  LayerConfig cfg = layer.cfg;
  cfg.sparse = positive ? layer.pos.params : layer.neg->params;
  return cfg;
}

void check_network_geometry(const EventStream& stream, const TrainedNetwork& net) {
  if (net.layers.empty()) throw validate_error("network has no trained layers");
  const int expected = net.config.input_channels;
  const int actual = stream.semantics == ChannelSemantics::kSensor ? 2 : stream.channel_count;
  if (actual != expected) {
    throw dimension_error("stream delivers " + std::to_string(actual) + " channels, network expects " +
                          std::to_string(expected));
  }
  if (net.width != 0 && (stream.width != net.width || stream.height != net.height)) {
    throw dimension_error("stream geometry " + std::to_string(stream.width) + "x" +
                          std::to_string(stream.height) + " does not match training geometry " +
                          std::to_string(net.width) + "x" + std::to_string(net.height));
  }
}

}  // namespace

TrainedNetwork train_network(const std::vector<EventStream>& training_streams,
                             const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  if (training_streams.empty()) throw validate_error("no training streams");
  const std::uint16_t w = training_streams.front().width;
  const std::uint16_t h = training_streams.front().height;
  for (const EventStream& s : training_streams) {
    if (s.width != w || s.height != h) {
      throw validate_error("training streams must share one geometry");
    }
  }

  TrainedNetwork net;
  net.config = config;
  net.seed = seed;
  net.width = w;
  net.height = h;
  const int depth = config.depth();

  {
    const LayerConfig& cfg = config.layers[0];
    Reservoir<Eigen::VectorXd> sample(config.max_train_surfaces, derive_seed(seed, "layer-1-sample"));
    for (const EventStream& s : training_streams) {
      for_each_surface(s, cfg.radius, cfg.tau_us,
                       [&](const Eigen::VectorXd& surf) { sample.offer(surf); });
    }
    if (sample.items().empty()) {
      throw Error("empty-branch", "depth 1 received zero events; cannot train");
    }
    auto [dict, report] = train_dictionary(sample.take(), cfg.atom_count, cfg.sparse,
                                           derive_seed(seed, "layer-1"));
    TrainedLayer layer{cfg, TrainedSubLayer{std::move(dict), report.resolved, std::move(report)},
                       std::nullopt};
    net.layers.push_back(std::move(layer));
  }

  for (int d = 2; d <= depth; ++d) {
    const LayerConfig& cfg = config.layers[d - 1];
    const std::string tag = "layer-" + std::to_string(d);
    Reservoir<Eigen::VectorXd> pos_sample(config.max_train_surfaces,
                                          derive_seed(seed, tag + "-pos-sample"));
    Reservoir<Eigen::VectorXd> neg_sample(config.max_train_surfaces,
                                          derive_seed(seed, tag + "-neg-sample"));
    for (const EventStream& s : training_streams) {
      // Run the stream through the already-trained prefix to get this
      // depth's (pos, neg) inputs.
      EncodeResult r1 = encode_layer(s, net.layers[0].pos.dict, encode_cfg(net.layers[0], true));
      EventStream pos_in = std::move(r1.pos);
      EventStream neg_in = std::move(r1.neg);
      for (int k = 2; k < d; ++k) {
        const TrainedLayer& layer = net.layers[static_cast<std::size_t>(k - 1)];
        EncodeResult ra = encode_layer(pos_in, layer.pos.dict, encode_cfg(layer, true));
        EncodeResult rb = encode_layer(neg_in, layer.neg->dict, encode_cfg(layer, false));
        std::tie(pos_in, neg_in) =
            merge_signed(ra.pos, ra.neg, rb.pos, rb.neg, layer.cfg.atom_count);
      }
      for_each_surface(pos_in, cfg.radius, cfg.tau_us,
                       [&](const Eigen::VectorXd& surf) { pos_sample.offer(surf); });
      for_each_surface(neg_in, cfg.radius, cfg.tau_us,
                       [&](const Eigen::VectorXd& surf) { neg_sample.offer(surf); });
    }
    if (pos_sample.items().empty()) {
      throw Error("empty-branch",
                  "depth " + std::to_string(d) + " positive branch received zero events");
    }
    if (neg_sample.items().empty()) {
      throw Error("empty-branch",
                  "depth " + std::to_string(d) + " negative branch received zero events");
    }
    auto [dict_pos, report_pos] = train_dictionary(pos_sample.take(), cfg.atom_count, cfg.sparse,
                                                   derive_seed(seed, tag + "-pos"));
    auto [dict_neg, report_neg] = train_dictionary(neg_sample.take(), cfg.atom_count, cfg.sparse,
                                                   derive_seed(seed, tag + "-neg"));
    TrainedLayer layer{cfg,
                       TrainedSubLayer{std::move(dict_pos), report_pos.resolved, std::move(report_pos)},
                       TrainedSubLayer{std::move(dict_neg), report_neg.resolved, std::move(report_neg)}};
    net.layers.push_back(std::move(layer));
  }
  return net;
}

RunResult run_network(const EventStream& stream, const TrainedNetwork& net) {
  check_network_geometry(stream, net);
  RunResult result;
  const int depth = net.depth();

  EncodeResult r1 = encode_layer(stream, net.layers[0].pos.dict, encode_cfg(net.layers[0], true));
  result.per_layer.push_back({1, '+', r1.stats});
  if (depth == 1) {
    result.leaf_pos = std::move(r1.pos);
    result.leaf_neg = std::move(r1.neg);
    return result;
  }

  EventStream pos_in = std::move(r1.pos);
  EventStream neg_in = std::move(r1.neg);
  for (int d = 2; d <= depth; ++d) {
    const TrainedLayer& layer = net.layers[static_cast<std::size_t>(d - 1)];
    EncodeResult ra = encode_layer(pos_in, layer.pos.dict, encode_cfg(layer, true));
    EncodeResult rb = encode_layer(neg_in, layer.neg->dict, encode_cfg(layer, false));
    result.per_layer.push_back({d, '+', ra.stats});
    result.per_layer.push_back({d, '-', rb.stats});
    // The sign merge after the final depth produces the leaf streams, with
    // one channel per final feature (2 * N_L).
    std::tie(pos_in, neg_in) = merge_signed(ra.pos, ra.neg, rb.pos, rb.neg, layer.cfg.atom_count);
  }
  result.leaf_pos = std::move(pos_in);
  result.leaf_neg = std::move(neg_in);
  return result;
}

namespace {

void write_sparse_params(std::string& out, const std::string& prefix, const SparseParams& p) {
  out += prefix + ".lambda=" + format_double(p.lambda) + "\n";
  out += prefix + ".sigma=" + format_double(p.sigma.value_or(0.0)) + "\n";
  out += prefix + ".eta=" + format_double(p.eta) + "\n";
  out += prefix + ".eps_smooth=" + format_double(p.eps_smooth) + "\n";
  out += prefix + ".max_cg_iters=" + std::to_string(p.max_cg_iters) + "\n";
  out += prefix + ".cg_tol=" + format_double(p.cg_tol) + "\n";
  out += prefix + ".epochs_max=" + std::to_string(p.epochs_max) + "\n";
  out += prefix + ".epoch_tol=" + format_double(p.epoch_tol) + "\n";
}

SparseParams read_sparse_params(const KeyValues& kv, const std::string& prefix) {
  SparseParams p;
  p.lambda = kv_double(kv, prefix + ".lambda");
  double sigma = kv_double(kv, prefix + ".sigma");
  p.sigma = sigma > 0 ? std::optional<double>(sigma) : std::nullopt;
  p.eta = kv_double(kv, prefix + ".eta");
  p.eps_smooth = kv_double(kv, prefix + ".eps_smooth");
  p.max_cg_iters = static_cast<int>(kv_int(kv, prefix + ".max_cg_iters"));
  p.cg_tol = kv_double(kv, prefix + ".cg_tol");
  p.epochs_max = static_cast<int>(kv_int(kv, prefix + ".epochs_max"));
  p.epoch_tol = kv_double(kv, prefix + ".epoch_tol");
  return p;
}

std::string dict_filename(int depth, bool positive, int network_depth) {
  if (depth == 1 && network_depth >= 1) return "L1.dict";
  return "L" + std::to_string(depth) + (positive ? "_pos" : "_neg") + ".dict";
}

int expected_input_channels(const TrainedNetwork& net, int depth) {
  if (depth == 1) return net.config.input_channels;
  if (depth == 2) return net.layers[0].cfg.atom_count;
  return 2 * net.layers[static_cast<std::size_t>(depth - 2)].cfg.atom_count;
}

}  // namespace

void save_network(const std::string& dir, const TrainedNetwork& net) {
  if (net.layers.empty()) throw validate_error("cannot save an untrained network");
  fs::create_directories(dir);
  std::string meta;
  meta += "# net v1\n";
  meta += "version=" + std::string(kVersion) + "\n";
  meta += "seed=" + std::to_string(net.seed) + "\n";
  meta += "depth=" + std::to_string(net.depth()) + "\n";
  meta += "width=" + std::to_string(net.width) + "\n";
  meta += "height=" + std::to_string(net.height) + "\n";
  meta += "input_channels=" + std::to_string(net.config.input_channels) + "\n";
  meta += "max_train_surfaces=" + std::to_string(net.config.max_train_surfaces) + "\n";
  meta += "channel_convention=sensor -1->1 +1->2; layer streams use 1..N\n";
  for (int d = 1; d <= net.depth(); ++d) {
    const TrainedLayer& layer = net.layers[static_cast<std::size_t>(d - 1)];
    const std::string prefix = "layer" + std::to_string(d);
    meta += prefix + ".tau_us=" + format_double(layer.cfg.tau_us) + "\n";
    meta += prefix + ".radius=" + std::to_string(layer.cfg.radius) + "\n";
    meta += prefix + ".atom_count=" + std::to_string(layer.cfg.atom_count) + "\n";
    meta += prefix + ".alpha_us=" + std::to_string(layer.cfg.alpha_us) + "\n";
    write_sparse_params(meta, prefix + ".pos", layer.pos.params);
    if (layer.neg) write_sparse_params(meta, prefix + ".neg", layer.neg->params);
  }
  {
    std::ofstream out(fs::path(dir) / "network.meta", std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot create network.meta under '" + dir + "'");
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    if (!out) throw io_error("write failed for network.meta");
  }
  for (int d = 1; d <= net.depth(); ++d) {
    const TrainedLayer& layer = net.layers[static_cast<std::size_t>(d - 1)];
    const int channels = expected_input_channels(net, d);
    save_dictionary_file((fs::path(dir) / dict_filename(d, true, net.depth())).string(),
                         layer.pos.dict, channels, layer.cfg.radius);
    if (layer.neg) {
      save_dictionary_file((fs::path(dir) / dict_filename(d, false, net.depth())).string(),
                           layer.neg->dict, channels, layer.cfg.radius);
    }
  }
}

TrainedNetwork load_network(const std::string& dir) {
  const fs::path meta_path = fs::path(dir) / "network.meta";
  KeyValues kv = read_key_values_file(meta_path.string());
  TrainedNetwork net;
  net.seed = kv_u64(kv, "seed");
  const int depth = static_cast<int>(kv_int(kv, "depth"));
  if (depth < 1) throw parse_error(meta_path.string() + ": depth must be >= 1");
  net.width = static_cast<std::uint16_t>(kv_u64_or(kv, "width", 0));
  net.height = static_cast<std::uint16_t>(kv_u64_or(kv, "height", 0));
  net.config.input_channels = static_cast<int>(kv_int(kv, "input_channels"));
  net.config.max_train_surfaces = kv_u64(kv, "max_train_surfaces");

  for (int d = 1; d <= depth; ++d) {
    const std::string prefix = "layer" + std::to_string(d);
    LayerConfig cfg;
    cfg.tau_us = kv_double(kv, prefix + ".tau_us");
    cfg.radius = static_cast<int>(kv_int(kv, prefix + ".radius"));
    cfg.atom_count = static_cast<int>(kv_int(kv, prefix + ".atom_count"));
    cfg.alpha_us = kv_u64(kv, prefix + ".alpha_us");
    TrainedLayer layer;
    layer.pos.params = read_sparse_params(kv, prefix + ".pos");
    cfg.sparse = layer.pos.params;
    layer.cfg = cfg;
    LoadedDictionary pos = load_dictionary_file((fs::path(dir) / dict_filename(d, true, depth)).string());
    layer.pos.dict = std::move(pos.dict);
    if (d > 1) {
      TrainedSubLayer neg;
      neg.params = read_sparse_params(kv, prefix + ".neg");
      LoadedDictionary nd = load_dictionary_file((fs::path(dir) / dict_filename(d, false, depth)).string());
      neg.dict = std::move(nd.dict);
      layer.neg = std::move(neg);
    }
    net.layers.push_back(std::move(layer));
    net.config.layers.push_back(cfg);
  }
  net.config.validate();

  // Wiring check: each dictionary must match the channel count the previous
  // depth delivers.
  for (int d = 1; d <= depth; ++d) {
    const TrainedLayer& layer = net.layers[static_cast<std::size_t>(d - 1)];
    const std::size_t side = 2 * static_cast<std::size_t>(layer.cfg.radius) + 1;
    const std::size_t want = static_cast<std::size_t>(expected_input_channels(net, d)) * side * side;
    if (static_cast<std::size_t>(layer.pos.dict.dim()) != want ||
        (layer.neg && static_cast<std::size_t>(layer.neg->dict.dim()) != want)) {
      throw validate_error(meta_path.string() + ": layer " + std::to_string(d) +
                           " dictionary dimension does not match the delivered channel count");
    }
    if (layer.neg && (layer.neg->dict.dim() != layer.pos.dict.dim() ||
                      layer.neg->dict.atom_count() != layer.pos.dict.atom_count())) {
      throw validate_error(meta_path.string() + ": layer " + std::to_string(d) +
                           " sub-layer dictionaries disagree in shape");
    }
  }
  return net;
}

}  // namespace evsc
