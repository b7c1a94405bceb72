#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "evsc/error.hpp"
#include "evsc/hierarchy.hpp"
#include "evsc/rng.hpp"

using namespace evsc;

namespace {

SparseParams plain_params(double lambda = 0.0) {
  SparseParams p;
  p.lambda = lambda;
  p.sigma = 1.0;
  return p;
}

LayerConfig layer(double tau, int radius, int atoms, std::uint64_t alpha, double lambda = 0.0) {
  LayerConfig cfg;
  cfg.tau_us = tau;
  cfg.radius = radius;
  cfg.atom_count = atoms;
  cfg.alpha_us = alpha;
  cfg.sparse = plain_params(lambda);
  return cfg;
}

// D x n dictionary whose atoms are unit vectors on chosen cells.
Dictionary indicator_dictionary(int dim, std::initializer_list<int> cells) {
  Dictionary d;
  d.atoms = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(cells.size()));
  int j = 0;
  for (int cell : cells) d.atoms(cell, j++) = 1.0;
  return d;
}

Dictionary random_signed_dictionary(Rng& rng, int dim, int n) {
  Dictionary d;
  d.atoms.resize(dim, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < dim; ++k) d.atoms(k, j) = rng.uniform(-1.0, 1.0);
    d.atoms.col(j).normalize();
  }
  return d;
}

EventStream sensor_stream(std::uint16_t w, std::uint16_t h, std::vector<Event> events) {
  EventStream s;
  s.width = w;
  s.height = h;
  s.channel_count = 2;
  s.semantics = ChannelSemantics::kSensor;
  s.events = std::move(events);
  return s;
}

EventStream random_layer_stream(Rng& rng, std::uint16_t w, std::uint16_t h, int channels,
                                std::size_t count, std::uint64_t max_gap) {
  EventStream s;
  s.width = w;
  s.height = h;
  s.channel_count = static_cast<std::uint16_t>(channels);
  s.semantics = ChannelSemantics::kLayer;
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < count; ++i) {
    t += rng.uniform_index(max_gap);
    s.events.push_back(Event{t, static_cast<std::uint16_t>(rng.uniform_index(w)),
                             static_cast<std::uint16_t>(rng.uniform_index(h)),
                             static_cast<std::int16_t>(1 + rng.uniform_index(
                                 static_cast<std::uint64_t>(channels)))});
  }
  return s;
}

}  // namespace

TEST(EvolveConfig, IdentityFactorKeepsTau) {
  NetworkConfig cfg = evolve_config(layer(10000, 2, 4, 0), EvolutionFactors{1.0, 1.0, 1.0}, 3);
  ASSERT_EQ(cfg.depth(), 3);
  for (const LayerConfig& l : cfg.layers) EXPECT_DOUBLE_EQ(l.tau_us, 10000.0);
}

TEST(EvolveConfig, DoublingAtomsGives8_16_32) {
  LayerConfig init = layer(1000, 1, 8, 0);
  NetworkConfig cfg = evolve_config(init, EvolutionFactors{1.0, 1.0, 2.0}, 3);
  ASSERT_EQ(cfg.depth(), 3);
  EXPECT_EQ(cfg.layers[0].atom_count, 8);
  EXPECT_EQ(cfg.layers[1].atom_count, 16);
  EXPECT_EQ(cfg.layers[2].atom_count, 32);
}

TEST(EvolveConfig, ExplicitExperimentalConfigurationValidates) {
  // N = (6, 9, 12), R = 2 everywhere, tau = (10, 15, 20) ms
  NetworkConfig cfg;
  cfg.layers = {layer(10000, 2, 6, 0), layer(15000, 2, 9, 0), layer(20000, 2, 12, 0)};
  apply_default_alpha(cfg);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.layers[0].alpha_us, 15000u);  // next layer's tau
  EXPECT_EQ(cfg.layers[1].alpha_us, 20000u);
  EXPECT_EQ(cfg.layers[2].alpha_us, 20000u);  // last layer keeps its own
}

TEST(EvolveConfig, RoundsAndClampsGeneratedValues) {
  NetworkConfig cfg = evolve_config(layer(100, 1, 3, 0), EvolutionFactors{1.5, 1.4, 1.5}, 3);
  // The recurrence applies to the rounded value: round(1.4*1) = 1 twice.
  EXPECT_EQ(cfg.layers[1].radius, 1);
  EXPECT_EQ(cfg.layers[2].radius, 1);
  EXPECT_EQ(cfg.layers[1].atom_count, 5);  // round(4.5), half away from zero
  EXPECT_EQ(cfg.layers[2].atom_count, 8);  // round(7.5)
  EXPECT_THROW(evolve_config(layer(100, 1, 3, 0), EvolutionFactors{0.5, 1, 1}, 2), Error);
}

TEST(Regenerate, FullMatchFiresImmediately) {
  std::vector<Event> pos, neg;
  Eigen::VectorXd a(3);
  a << 1.0, -1.0, 0.25;
  regenerate_events(Event{100, 3, 4, 1}, a, 1000, pos, neg);
  ASSERT_EQ(pos.size(), 2u);
  ASSERT_EQ(neg.size(), 1u);
  EXPECT_EQ(pos[0], (Event{100, 3, 4, 1}));        // |a| = 1: zero delay
  EXPECT_EQ(neg[0], (Event{100, 3, 4, 2}));        // |-1| = 1 too, routed by sign
  EXPECT_EQ(pos[1], (Event{100 + 750, 3, 4, 3}));  // 1000 * (1 - 0.25)
}

TEST(Regenerate, ZeroCoefficientDelaysByAlphaAndRoutesPositive) {
  std::vector<Event> pos, neg;
  Eigen::VectorXd a(1);
  a << 0.0;
  regenerate_events(Event{50, 1, 2, 1}, a, 123, pos, neg);
  ASSERT_EQ(pos.size(), 1u);
  EXPECT_TRUE(neg.empty());
  EXPECT_EQ(pos[0], (Event{173, 1, 2, 1}));
}

TEST(Regenerate, DelayBoundsAndMonotoneSimilarity) {
  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::uint64_t alpha = rng.uniform_index(5000);
    Eigen::VectorXd a(4);
    for (int j = 0; j < 4; ++j) a[j] = rng.uniform(-1.0, 1.0);
    std::vector<Event> pos, neg;
    Event in{1000000 + rng.uniform_index(1000), 5, 6, 2};
    regenerate_events(in, a, alpha, pos, neg);
    std::vector<Event> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    ASSERT_EQ(all.size(), 4u);
    std::vector<std::uint64_t> t_of(4);
    for (const Event& ev : all) {
      ASSERT_GE(ev.t, in.t);
      ASSERT_LE(ev.t, in.t + alpha);
      EXPECT_EQ(ev.x, in.x);
      EXPECT_EQ(ev.y, in.y);
      t_of[static_cast<std::size_t>(ev.p - 1)] = ev.t;
    }
    for (int j = 0; j < 4; ++j) {
      for (int k = 0; k < 4; ++k) {
        if (std::abs(a[j]) > std::abs(a[k])) ASSERT_LE(t_of[j], t_of[k]);
      }
    }
  }
}

TEST(EncodeLayer, EmitsOneEventPerAtomPerInput) {
  Rng rng(21);
  EventStream input = random_layer_stream(rng, 8, 8, 2, 57, 40);
  Dictionary dict = random_signed_dictionary(rng, 2 * 9, 3);
  EncodeResult res = encode_layer(input, dict, layer(100, 1, 3, 500, 0.1));
  EXPECT_EQ(res.pos.events.size() + res.neg.events.size(), 3 * input.events.size());
  EXPECT_EQ(res.stats.input_events, input.events.size());
  EXPECT_EQ(res.stats.pos_events, res.pos.events.size());
  EXPECT_EQ(res.stats.neg_events, res.neg.events.size());
  for (const EventStream* s : {&res.pos, &res.neg}) {
    EXPECT_EQ(s->channel_count, 3);
    EXPECT_EQ(s->semantics, ChannelSemantics::kLayer);
    EXPECT_NO_THROW(s->validate());  // sorted, in-bounds, channels in [1, N]
  }
  std::uint64_t total_binned = 0;
  for (std::uint64_t c : res.stats.coeff_histogram) total_binned += c;
  EXPECT_EQ(total_binned, 3 * input.events.size());
}

TEST(EncodeLayer, PerfectMatchEmitsWithZeroDelay) {
  // Single event; the lone atom equals its surface (the channel-1 center
  // indicator), so the coefficient is exactly 1 and the delay exactly 0.
  EventStream input = sensor_stream(3, 3, {Event{77, 1, 1, -1}});
  const int dim = 2 * 9;
  Dictionary dict;
  dict.atoms = Eigen::MatrixXd::Zero(dim, 1);
  dict.atoms(4, 0) = 1.0;
  EncodeResult res = encode_layer(input, dict, layer(100, 1, 1, 1000, 0.0));
  ASSERT_EQ(res.pos.events.size(), 1u);
  EXPECT_EQ(res.pos.events[0].t, 77u);
  EXPECT_TRUE(res.neg.events.empty());
}

TEST(EncodeLayer, DimensionMismatchThrows) {
  EventStream input = sensor_stream(4, 4, {});
  Dictionary dict = indicator_dictionary(10, {0});
  EXPECT_THROW(encode_layer(input, dict, layer(100, 1, 1, 10)), Error);
}

TEST(MergeSigned, EmptySideWidensChannels) {
  Rng rng(31);
  EventStream pos_a = random_layer_stream(rng, 4, 4, 3, 10, 50);
  EventStream empty = random_layer_stream(rng, 4, 4, 3, 0, 1);
  auto [pos, neg] = merge_signed(pos_a, empty, empty, empty, 3);
  EXPECT_EQ(pos.channel_count, 6);
  EXPECT_EQ(neg.channel_count, 6);
  ASSERT_EQ(pos.events.size(), pos_a.events.size());
  for (std::size_t i = 0; i < pos.events.size(); ++i) EXPECT_EQ(pos.events[i], pos_a.events[i]);
  EXPECT_TRUE(neg.events.empty());
}

TEST(MergeSigned, OffsetsSecondSubLayerChannels) {
  EventStream a = sensor_stream(4, 4, {});
  a.semantics = ChannelSemantics::kLayer;
  a.channel_count = 4;
  EventStream b = a;
  a.events = {Event{10, 0, 0, 2}};
  b.events = {Event{5, 1, 1, 2}};
  EventStream empty = a;
  empty.events.clear();
  auto [pos, neg] = merge_signed(a, empty, b, empty, 4);
  ASSERT_EQ(pos.events.size(), 2u);
  EXPECT_EQ(pos.events[0], (Event{5, 1, 1, 6}));  // offset by N = 4
  EXPECT_EQ(pos.events[1], (Event{10, 0, 0, 2}));
  EXPECT_NO_THROW(pos.validate());
}

TEST(MergeSigned, MatchesConcatenateAndSortOracle) {
  Rng rng(37);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 3;
    EventStream pa = random_layer_stream(rng, 6, 6, n, rng.uniform_index(30), 20);
    EventStream na = random_layer_stream(rng, 6, 6, n, rng.uniform_index(30), 20);
    EventStream pb = random_layer_stream(rng, 6, 6, n, rng.uniform_index(30), 20);
    EventStream nb = random_layer_stream(rng, 6, 6, n, rng.uniform_index(30), 20);
    auto [pos, neg] = merge_signed(pa, na, pb, nb, n);

    auto oracle = [n](const EventStream& first, const EventStream& second) {
      std::vector<Event> all = first.events;
      for (Event ev : second.events) {
        ev.p = static_cast<std::int16_t>(ev.p + n);
        all.push_back(ev);
      }
      std::stable_sort(all.begin(), all.end(),
                       [](const Event& x, const Event& y) { return x.t < y.t; });
      return all;
    };
    EXPECT_EQ(pos.events, oracle(pa, pb)) << "trial " << trial;
    EXPECT_EQ(neg.events, oracle(na, nb)) << "trial " << trial;
    EXPECT_EQ(pos.events.size(), pa.events.size() + pb.events.size());
  }
}

TEST(MergeSigned, GeometryMismatchThrows) {
  Rng rng(41);
  EventStream a = random_layer_stream(rng, 4, 4, 2, 3, 10);
  EventStream b = random_layer_stream(rng, 5, 4, 2, 3, 10);
  EXPECT_THROW(merge_signed(a, a, b, b, 2), Error);
}

// Two events through a hand-built two-layer network; every surface value,
// coefficient, delay and sort position below is enumerated by hand.
TEST(RunNetwork, TwoLayerHandTrace) {
  TrainedNetwork net;
  net.config.input_channels = 2;
  net.config.layers = {layer(100, 1, 2, 10), layer(50, 1, 2, 20)};
  net.seed = 0;

  // Indicator atoms on the center cell of channel 1 resp. channel 2.
  const int center_ch1 = (0 * 3 + 1) * 3 + 1;  // 4
  const int center_ch2 = (1 * 3 + 1) * 3 + 1;  // 13
  Dictionary ind = indicator_dictionary(18, {center_ch1, center_ch2});
  net.layers.push_back(TrainedLayer{net.config.layers[0],
                                    TrainedSubLayer{ind, plain_params(), {}},
                                    std::nullopt});
  net.layers.push_back(TrainedLayer{net.config.layers[1],
                                    TrainedSubLayer{ind, plain_params(), {}},
                                    TrainedSubLayer{ind, plain_params(), {}}});

  EventStream input = sensor_stream(3, 3, {Event{0, 1, 1, -1}, Event{5, 1, 1, 1}});
  RunResult run = run_network(input, net);

  // Layer 1 (alpha 10): event 1 (channel 1) -> a = (1, 0): out (t0, p1), (t10, p2).
  // event 2 (channel 2) -> a = (exp(-0.05), 1): delays round(10*(1-e^-.05)) = 0
  // and 0 -> out (t5, p1), (t5, p2). All coefficients >= 0, so neg is empty.
  // Layer 2 pos sub-layer (alpha 20, tau 50) sees (0,p1),(5,p1),(5,p2),(10,p2):
  //   (0,p1):  a=(1,0)        -> (0,p1), (20,p2)
  //   (5,p1):  a=(1,0)        -> (5,p1), (25,p2)
  //   (5,p2):  a=(1,1)        -> (5,p1), (5,p2)
  //   (10,p2): a=(e^-0.1, 1)  -> (12,p1), (10,p2)   [round(20*(1-e^-0.1)) = 2]
  // The empty (2,-) sub-layer contributes nothing; the final sign merge
  // leaves channels 1..2 and widens the leaf streams to 2*N_2 = 4 channels.
  const std::vector<Event> expected = {
      Event{0, 1, 1, 1},  Event{5, 1, 1, 1},  Event{5, 1, 1, 1},  Event{5, 1, 1, 2},
      Event{10, 1, 1, 2}, Event{12, 1, 1, 1}, Event{20, 1, 1, 2}, Event{25, 1, 1, 2},
  };
  EXPECT_EQ(run.leaf_pos.events, expected);
  EXPECT_TRUE(run.leaf_neg.events.empty());
  EXPECT_EQ(run.leaf_total(), 2u * 2u * 2u);
  EXPECT_EQ(run.leaf_pos.channel_count, 4);
  EXPECT_EQ(run.leaf_neg.channel_count, 4);
  EXPECT_EQ(net.final_feature_count(), 4);
  ASSERT_EQ(run.per_layer.size(), 3u);
  EXPECT_EQ(run.per_layer[0].stats.pos_events, 4u);
  EXPECT_EQ(run.per_layer[0].stats.neg_events, 0u);
}

TEST(RunNetwork, EmptyInputYieldsEmptyLeaves) {
  TrainedNetwork net;
  net.config.input_channels = 2;
  net.config.layers = {layer(100, 1, 2, 10)};
  Dictionary ind = indicator_dictionary(18, {4, 13});
  net.layers.push_back(
      TrainedLayer{net.config.layers[0], TrainedSubLayer{ind, plain_params(), {}}, std::nullopt});
  RunResult run = run_network(sensor_stream(3, 3, {}), net);
  EXPECT_TRUE(run.leaf_pos.events.empty());
  EXPECT_TRUE(run.leaf_neg.events.empty());
  EXPECT_EQ(run.leaf_pos.channel_count, 2);  // depth-1 leaves keep the layer's N_1 channels
  EXPECT_EQ(net.final_feature_count(), 2);
  EXPECT_EQ(run.per_layer[0].stats.input_events, 0u);
}

TEST(RunNetwork, LeafCountIsExactlyInputTimesAtomProduct) {
  Rng rng(53);
  TrainedNetwork net;
  net.config.input_channels = 2;
  net.config.layers = {layer(80, 1, 2, 40, 0.1), layer(120, 1, 3, 60, 0.1),
                       layer(160, 1, 2, 80, 0.1)};
  net.layers.push_back(TrainedLayer{net.config.layers[0],
                                    TrainedSubLayer{random_signed_dictionary(rng, 18, 2),
                                                    plain_params(0.1), {}},
                                    std::nullopt});
  net.layers.push_back(TrainedLayer{net.config.layers[1],
                                    TrainedSubLayer{random_signed_dictionary(rng, 18, 3),
                                                    plain_params(0.1), {}},
                                    TrainedSubLayer{random_signed_dictionary(rng, 18, 3),
                                                    plain_params(0.1), {}}});
  net.layers.push_back(TrainedLayer{net.config.layers[2],
                                    TrainedSubLayer{random_signed_dictionary(rng, 54, 2),
                                                    plain_params(0.1), {}},
                                    TrainedSubLayer{random_signed_dictionary(rng, 54, 2),
                                                    plain_params(0.1), {}}});

  EventStream input = sensor_stream(8, 8, {});
  std::uint64_t t = 0;
  for (int i = 0; i < 25; ++i) {
    t += rng.uniform_index(60);
    input.events.push_back(Event{t, static_cast<std::uint16_t>(rng.uniform_index(8)),
                                 static_cast<std::uint16_t>(rng.uniform_index(8)),
                                 static_cast<std::int16_t>(rng.coin() ? 1 : -1)});
  }
  RunResult run = run_network(input, net);
  EXPECT_EQ(run.leaf_total(), 25u * 2u * 3u * 2u);
  // per-sub-layer amplification: |pos| + |neg| = N * |input|
  for (const SubLayerStats& s : run.per_layer) {
    const int n = net.config.layers[static_cast<std::size_t>(s.depth - 1)].atom_count;
    EXPECT_EQ(s.stats.pos_events + s.stats.neg_events,
              static_cast<std::uint64_t>(n) * s.stats.input_events);
  }
  EXPECT_NO_THROW(run.leaf_pos.validate());
  EXPECT_NO_THROW(run.leaf_neg.validate());
  EXPECT_EQ(run.leaf_pos.channel_count, 4);  // 2 * N_3 leaf features
}

TEST(TrainNetwork, DepthOneMatchesPlainDictionaryTraining) {
  Rng rng(61);
  std::vector<EventStream> streams;
  for (int i = 0; i < 3; ++i) streams.push_back(random_layer_stream(rng, 6, 6, 2, 30, 50));
  NetworkConfig cfg;
  cfg.input_channels = 2;
  cfg.layers = {layer(100, 1, 2, 50, 0.1)};
  const std::uint64_t seed = 909;
  TrainedNetwork net = train_network(streams, cfg, seed);
  ASSERT_EQ(net.depth(), 1);
  EXPECT_FALSE(net.layers[0].neg.has_value());
  EXPECT_EQ(net.final_feature_count(), 2);

  std::vector<Eigen::VectorXd> surfaces;
  for (const EventStream& s : streams) {
    for_each_surface(s, 1, 100.0, [&](const Eigen::VectorXd& v) { surfaces.push_back(v); });
  }
  auto [dict, report] = train_dictionary(surfaces, 2, cfg.layers[0].sparse,
                                         derive_seed(seed, "layer-1"));
  EXPECT_EQ(net.layers[0].pos.dict.atoms, dict.atoms);  // bitwise
}

TEST(TrainNetwork, DeterministicGivenSeed) {
  Rng rng(67);
  std::vector<EventStream> streams;
  for (int i = 0; i < 2; ++i) streams.push_back(random_layer_stream(rng, 6, 6, 2, 40, 30));
  NetworkConfig cfg;
  cfg.input_channels = 2;
  cfg.layers = {layer(100, 1, 2, 50, 0.0), layer(150, 1, 2, 75, 0.0)};
  TrainedNetwork a = train_network(streams, cfg, 31337);
  TrainedNetwork b = train_network(streams, cfg, 31337);
  ASSERT_EQ(a.depth(), 2);
  EXPECT_EQ(a.layers[0].pos.dict.atoms, b.layers[0].pos.dict.atoms);
  EXPECT_EQ(a.layers[1].pos.dict.atoms, b.layers[1].pos.dict.atoms);
  EXPECT_EQ(a.layers[1].neg->dict.atoms, b.layers[1].neg->dict.atoms);
}

TEST(TrainNetwork, EmptyBranchIsReportedWithDepthAndSign) {
  // With no sparseness term the lone coefficient equals the correlation of
  // a non-negative atom with a non-negative surface, so it never goes
  // negative and the depth-2 negative branch starves.
  std::vector<EventStream> streams = {
      sensor_stream(3, 3, {Event{0, 1, 1, -1}, Event{50, 1, 1, -1}})};
  NetworkConfig cfg;
  cfg.input_channels = 2;
  cfg.layers = {layer(100, 1, 1, 50, 0.0), layer(150, 1, 1, 75, 0.0)};
  cfg.layers[0].sparse.sigma.reset();  // exercise the auto-sigma path too
  try {
    train_network(streams, cfg, 5);
    FAIL() << "expected empty-branch error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty-branch");
    EXPECT_NE(std::string(e.what()).find("depth 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("negative"), std::string::npos);
  }
}

TEST(NetworkIo, SaveLoadRoundTripsBitExact) {
  Rng rng(71);
  std::vector<EventStream> streams;
  for (int i = 0; i < 2; ++i) streams.push_back(random_layer_stream(rng, 6, 6, 2, 40, 30));
  NetworkConfig cfg;
  cfg.input_channels = 2;
  cfg.max_train_surfaces = 500;
  cfg.layers = {layer(100, 1, 2, 50, 0.1), layer(150, 1, 2, 75, 0.1)};
  TrainedNetwork net = train_network(streams, cfg, 424242);

  namespace fs = std::filesystem;
  const fs::path dir = fs::path(testing::TempDir()) / "evsc_net_roundtrip";
  fs::remove_all(dir);
  save_network(dir.string(), net);
  ASSERT_TRUE(fs::exists(dir / "network.meta"));
  ASSERT_TRUE(fs::exists(dir / "L1.dict"));
  ASSERT_TRUE(fs::exists(dir / "L2_pos.dict"));
  ASSERT_TRUE(fs::exists(dir / "L2_neg.dict"));

  TrainedNetwork loaded = load_network(dir.string());
  EXPECT_EQ(loaded.seed, net.seed);
  ASSERT_EQ(loaded.depth(), net.depth());
  EXPECT_EQ(loaded.layers[0].pos.dict.atoms, net.layers[0].pos.dict.atoms);
  EXPECT_EQ(loaded.layers[1].neg->dict.atoms, net.layers[1].neg->dict.atoms);
  EXPECT_EQ(loaded.layers[1].cfg.alpha_us, net.layers[1].cfg.alpha_us);

  const fs::path dir2 = fs::path(testing::TempDir()) / "evsc_net_roundtrip2";
  fs::remove_all(dir2);
  save_network(dir2.string(), loaded);
  for (const char* name : {"network.meta", "L1.dict", "L2_pos.dict", "L2_neg.dict"}) {
    std::ifstream f1(dir / name, std::ios::binary);
    std::ifstream f2(dir2 / name, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    EXPECT_EQ(b1, b2) << name;
  }

  // The loaded network behaves identically.
  EventStream probe = random_layer_stream(rng, 6, 6, 2, 20, 40);
  RunResult r1 = run_network(probe, net);
  RunResult r2 = run_network(probe, loaded);
  EXPECT_EQ(r1.leaf_pos.events, r2.leaf_pos.events);
  EXPECT_EQ(r1.leaf_neg.events, r2.leaf_neg.events);
}

TEST(RunNetwork, GeometryMismatchAgainstTrainingIsAnError) {
  Rng rng(73);
  std::vector<EventStream> streams = {random_layer_stream(rng, 6, 6, 2, 30, 40)};
  NetworkConfig cfg;
  cfg.input_channels = 2;
  cfg.layers = {layer(100, 1, 2, 50, 0.0)};
  TrainedNetwork net = train_network(streams, cfg, 1);
  EXPECT_EQ(net.width, 6);
  EventStream probe = random_layer_stream(rng, 7, 6, 2, 5, 40);
  EXPECT_THROW(run_network(probe, net), Error);
  EventStream bad_channels = random_layer_stream(rng, 6, 6, 3, 5, 40);
  EXPECT_THROW(run_network(bad_channels, net), Error);
}

TEST(NormalizeSensorChannels, MapsPolaritiesToLayerChannels) {
  EventStream s = sensor_stream(4, 4, {Event{1, 0, 0, -1}, Event{2, 1, 1, 1}});
  EventStream out = normalize_sensor_channels(s);
  EXPECT_EQ(out.semantics, ChannelSemantics::kLayer);
  EXPECT_EQ(out.events[0].p, 1);
  EXPECT_EQ(out.events[1].p, 2);
  EXPECT_NO_THROW(out.validate());
}
