#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "evsc/events.hpp"
#include "evsc/sparse_coding.hpp"
#include "evsc/time_surface.hpp"

namespace evsc {

struct LayerConfig {
  double tau_us = 0;           // decay constant, > 0
  int radius = 1;              // neighborhood radius, >= 1
  int atom_count = 1;          // N, >= 1
  std::uint64_t alpha_us = 0;  // timing scale of regenerated events
  SparseParams sparse;

  void validate() const;
};

struct EvolutionFactors {
  double k_tau = 1.0;
  double k_radius = 1.0;
  double k_atoms = 1.0;
};

/// Per-layer parameters; either listed explicitly or generated from layer-1
/// initial conditions by the geometric rule tau_{i+1} = K_tau * tau_i,
/// R_{i+1} = round(K_R * R_i), N_{i+1} = round(K_N * N_i) (minimum 1).
struct NetworkConfig {
  std::vector<LayerConfig> layers;   // size = depth L >= 1
  int input_channels = 2;            // sensor polarities at layer 1
  std::size_t max_train_surfaces = 6000;  // reservoir cap per dictionary

  int depth() const { return static_cast<int>(layers.size()); }
  void validate() const;
};

NetworkConfig evolve_config(const LayerConfig& init, const EvolutionFactors& factors, int depth);

/// Fills any alpha_us == 0 with the default: the decay constant of the layer
/// that consumes the events (the next layer's tau; the last layer uses its
/// own), rounded to integer microseconds.
void apply_default_alpha(NetworkConfig& config);

/// Sensor polarities become layer channels {1, 2} (-1 -> 1, +1 -> 2) so all
/// layers share one channel convention. Layer streams pass through.
EventStream normalize_sensor_channels(const EventStream& stream);

inline constexpr int kCoeffHistogramBins = 20;  // over [-1, 1]

struct EncodeStats {
  std::uint64_t input_events = 0;
  std::uint64_t pos_events = 0;
  std::uint64_t neg_events = 0;
  std::array<std::uint64_t, kCoeffHistogramBins> coeff_histogram{};
};

struct EncodeResult {
  EventStream pos;
  EventStream neg;
  EncodeStats stats;
};

/// Events regenerated from one input event's coefficients: one event per
/// atom at (x_in, y_in), t_out = t_in + round(alpha * (1 - |a_j|)),
/// p_out = j; a_j >= 0 routes to the positive branch. Exposed separately so
/// the delay/routing rule is testable in isolation.
void regenerate_events(const Event& input, const Eigen::VectorXd& coeffs, std::uint64_t alpha_us,
                       std::vector<Event>& pos_out, std::vector<Event>& neg_out);

/// Projects every input event's time-surface onto the dictionary and emits
/// the regenerated events, each branch sorted by (t, input sequence, atom).
EncodeResult encode_layer(const EventStream& input, const Dictionary& dict, const LayerConfig& cfg);

/// Streams surfaces to `sink` instead of encoding; used to collect training
/// batches. Surface dimension is input.channel_count * (2*radius+1)^2.
void for_each_surface(const EventStream& input, int radius, double tau_us,
                      const std::function<void(const Eigen::VectorXd&)>& sink);

/// Merges the four outputs of one depth's two sign sub-layers by sign:
/// B-side channels are offset by N, so the merged streams carry 2N
/// channels. Ties in time keep A-side events first. Feeds the next depth's
/// inputs; applied after the final depth it yields the leaf streams.
std::pair<EventStream, EventStream> merge_signed(const EventStream& pos_a, const EventStream& neg_a,
                                                 const EventStream& pos_b, const EventStream& neg_b,
                                                 int atom_count);

struct TrainedSubLayer {
  Dictionary dict;
  SparseParams params;  // sigma resolved
  TrainReport report;
};

/// One depth of the trained network: depth 1 holds a single dictionary in
/// `pos`; deeper layers hold the (i,+) and (i,-) sub-layer pair.
struct TrainedLayer {
  LayerConfig cfg;
  TrainedSubLayer pos;
  std::optional<TrainedSubLayer> neg;
};

struct TrainedNetwork {
  NetworkConfig config;
  std::vector<TrainedLayer> layers;
  std::uint64_t seed = 0;
  std::uint16_t width = 0;   // training geometry; 0 leaves it unchecked
  std::uint16_t height = 0;

  int depth() const { return static_cast<int>(layers.size()); }
  /// 2 * N_L for depth > 1 (one leaf stream per sign branch), N_1 otherwise.
  int final_feature_count() const;
};

/// Trains layers consecutively: depth 1 on the surfaces of all training
/// streams, each deeper sub-layer on the surfaces of the sign branch the
/// already-trained prefix delivers to it. Throws Error("empty-branch", ...)
/// naming the depth and sign if a branch receives no events.
TrainedNetwork train_network(const std::vector<EventStream>& training_streams,
                             const NetworkConfig& config, std::uint64_t seed);

struct SubLayerStats {
  int depth = 0;
  char branch = '+';  // '+', '-'; depth 1 uses '+'
  EncodeStats stats;
};

/// Leaf streams follow the sign branches: events regenerated from positive
/// coefficients land in leaf_pos, negative ones in leaf_neg. For depth > 1
/// the two final sub-layers are merged with channel offsets, so the leaves
/// carry 2*N_L channels (the network's feature count); a depth-1 network
/// yields its single layer's two branches with N_1 channels.
struct RunResult {
  EventStream leaf_pos;
  EventStream leaf_neg;
  std::vector<SubLayerStats> per_layer;

  std::uint64_t leaf_total() const { return leaf_pos.events.size() + leaf_neg.events.size(); }
};

RunResult run_network(const EventStream& stream, const TrainedNetwork& net);

/// Network directory: network.meta (key=value text) plus one dictionary file
/// per sub-layer (L1.dict, L2_pos.dict, L2_neg.dict, ...).
void save_network(const std::string& dir, const TrainedNetwork& net);
TrainedNetwork load_network(const std::string& dir);

}  // namespace evsc
