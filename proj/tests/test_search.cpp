#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "dnas3d/errors.hpp"
#include "dnas3d/search.hpp"
#include "fixtures.hpp"

using namespace dnas3d;
using fixtures::TempDir;
using fixtures::tiny_config;

namespace {

TransformConfig transforms_for(int size) {
  TransformConfig t;
  t.target_slices = size;
  t.resize = {size, size};
  t.center_crop = {size, size};
  return t;
}

// Random-noise volumes with labels cycling through the classes.
std::vector<Volume> noise_volumes(std::size_t n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Volume> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = std::size_t(size);
    out.push_back({gradcheck::random_array({s, s, s}, rng), "v" + std::to_string(i), int(i % 3)});
  }
  return out;
}

Batch batch_of(const std::vector<Volume>& vols, int size) {
  std::vector<std::size_t> idx(vols.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(0);
  return make_batch(vols, idx, transforms_for(size), Split::test, rng);
}

SearchHistory synthetic_history(const std::vector<double>& accuracies) {
  SearchHistory h;
  h.config = tiny_config();
  for (std::size_t i = 0; i < accuracies.size(); ++i) {
    SearchRecord r;
    r.epoch = int(i);
    r.choices = {int(i % 8), int(i / 8 % 8), 0, 0, 0};
    r.val_accuracy = accuracies[i];
    r.val_loss = 1.0;
    r.tau = 1.0;
    h.records.push_back(r);
  }
  return h;
}

}  // namespace

TEST(SearchConfig, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.alpha_lr, 1e-3);
  EXPECT_EQ(c.weight_lr, 1e-3);
  c.tau_end = 10.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.val_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(MakeChunks, DropsTrailingSingleton) {
  std::vector<std::size_t> order(9);
  std::iota(order.begin(), order.end(), 0);
  EXPECT_EQ(make_chunks(order, 4, true).size(), 2u);
  EXPECT_EQ(make_chunks(order, 4, false).size(), 3u);
  EXPECT_EQ(make_chunks(order, 3, true).size(), 3u);
}

TEST(SearchStep, ArchitecturePhaseRoutesGradientOnlyToAlpha) {
  Supernet net(tiny_config(), 1);
  GumbelSampler sampler(1.0, make_rng(1, Stream::architecture));
  const auto val = batch_of(noise_volumes(4, 8, 2), 8);
  std::vector<int> sel;
  alpha_gradient(net, sampler, val, sel);
  ASSERT_TRUE(net.alpha().tensor.has_grad());
  const Array& g = net.alpha().tensor.grad();
  for (std::size_t p = 0; p < 5; ++p) {
    double row = 0.0;
    for (std::size_t k = 0; k < 8; ++k) row += std::abs(g[p * 8 + k]);
    EXPECT_GT(row, 0.0) << "position " << p;
  }
  for (auto* p : net.refs().params) EXPECT_FALSE(p->tensor.has_grad()) << p->name;
  for (auto* p : net.refs().params) EXPECT_TRUE(p->tensor.requires_grad());
}

TEST(SearchStep, WeightPhaseLeavesAlphaUntouched) {
  Supernet net(tiny_config(), 2);
  GumbelSampler sampler(1.0, make_rng(2, Stream::architecture));
  const auto train = batch_of(noise_volumes(4, 8, 3), 8), val = batch_of(noise_volumes(4, 8, 4), 8);
  Optimizer aopt = Optimizer::adam({1e-2}), wopt = Optimizer::sgd({1e-2});
  const Array before = net.alpha().tensor.value();
  // Replays phase 1 on a copy of the sampler to learn the post-phase-1 alpha.
  Supernet probe(tiny_config(), 2);
  GumbelSampler probe_sampler = sampler;
  std::vector<int> sel;
  alpha_gradient(probe, probe_sampler, val, sel);
  Optimizer probe_opt = Optimizer::adam({1e-2});
  Parameter* pa = &probe.alpha();
  probe_opt.step(std::span<Parameter* const>(&pa, 1));

  const auto stats = search_step(net, sampler, train, val, aopt, wopt);
  EXPECT_EQ(stats.alpha_selections, sel);
  EXPECT_EQ(net.alpha().tensor.value(), probe.alpha().tensor.value());
  EXPECT_FALSE(net.alpha().tensor.value() == before);
  EXPECT_FALSE(net.alpha().tensor.has_grad());
}

TEST(SearchStep, WeightPhaseOverfitsOneBatch) {
  Supernet net(tiny_config(), 3);
  const auto train = batch_of(noise_volumes(6, 8, 5), 8);
  const std::vector<int> sel{0, 3, 5, 1, 2};
  Optimizer opt = Optimizer::sgd({0.05, 0.9, 0.0});
  const double first = weight_gradient(net, sel, train);
  double last = first;
  for (int step = 0; step < 50; ++step) {
    if (step > 0) last = weight_gradient(net, sel, train);
    EXPECT_FALSE(net.alpha().tensor.has_grad());
    opt.step(net.refs_for(sel).params);
  }
  EXPECT_LT(last, 0.5 * first);
}

TEST(SelectTopK, LargestAccuraciesFirst) {
  std::vector<double> acc(100);
  for (std::size_t i = 0; i < 100; ++i) acc[i] = double((i * 37) % 100) / 100.0;
  const auto top = select_top_k(synthetic_history(acc), 10);
  ASSERT_EQ(top.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(top[i].provenance.val_accuracy, double(99 - i) / 100.0);
}

TEST(SelectTopK, WholeHistoryIsAPermutation) {
  std::vector<double> acc{0.3, 0.9, 0.1, 0.5, 0.7};
  const auto h = synthetic_history(acc);
  const auto all = select_top_k(h, 5);
  std::set<int> epochs;
  for (const auto& a : all) epochs.insert(a.provenance.search_epoch);
  EXPECT_EQ(epochs.size(), 5u);
}

TEST(SelectTopK, TiesBreakOnLossThenLaterEpoch) {
  auto h = synthetic_history(std::vector<double>(6, 0.5));
  h.records[2].val_loss = 0.5;
  const auto a = select_top_k(h, 6), b = select_top_k(h, 6);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[0].provenance.search_epoch, 2);
  EXPECT_EQ(a[1].provenance.search_epoch, 5);
  EXPECT_EQ(a[5].provenance.search_epoch, 0);
  EXPECT_THROW(select_top_k(SearchHistory{}, 1), StateError);
}

TEST(SearchHistory, JsonRoundTrip) {
  TempDir dir("hist");
  auto h = synthetic_history({0.25, 0.5, 0.75});
  h.records[1].val_loss = 0.123456789012345678;
  save_history((dir.path() / "h.json").string(), h);
  const auto back = load_history((dir.path() / "h.json").string());
  EXPECT_EQ(back.config, h.config);
  ASSERT_EQ(back.records.size(), 3u);
  EXPECT_EQ(back.records[1].val_loss, h.records[1].val_loss);
  EXPECT_EQ(back.records[2].choices, h.records[2].choices);
  EXPECT_EQ(h.descriptor(1).provenance.search_epoch, 1);
}

TEST(RunSearch, RecordsOneArchitecturePerEpochDeterministically) {
  const auto pool = noise_volumes(12, 8, 6);
  SearchConfig c;
  c.epochs = 3;
  c.batch_size = 4;
  c.seed = 9;
  Supernet a(tiny_config(), 9), b(tiny_config(), 9);
  const auto ha = run_search(a, pool, transforms_for(8), c), hb = run_search(b, pool, transforms_for(8), c);
  ASSERT_EQ(ha.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ha.records[i].epoch, int(i));
    EXPECT_EQ(ha.records[i].choices, hb.records[i].choices);
    EXPECT_EQ(ha.records[i].val_loss, hb.records[i].val_loss);
  }
  EXPECT_GE(ha.records[0].tau, ha.records[2].tau);
  EXPECT_EQ(ha.records.back().choices, argmax_rows(a.alpha().tensor.value()));
}

TEST(RunSearch, RejectsSingleClassData) {
  auto pool = noise_volumes(6, 8, 7);
  for (auto& v : pool) v.label = 0;
  Supernet net(tiny_config(), 0);
  SearchConfig c;
  c.epochs = 1;
  EXPECT_THROW(run_search(net, pool, transforms_for(8), c), ConfigError);
}

TEST(Shortlist, SingleCandidateReturnedUnchanged) {
  ArchDescriptor a{tiny_config(), {1, 2, 3, 4, 5}, {4, 0.5, 0.6}};
  const auto r = shortlist_train({a}, {}, transforms_for(8), ShortlistConfig{});
  EXPECT_EQ(r.best, a);
}

TEST(Shortlist, IdenticalCandidatesScoreIdentically) {
  const auto pool = noise_volumes(12, 8, 8);
  ArchDescriptor a{tiny_config(), {1, 2, 3, 4, 5}, {0, 0.0, 0.0}};
  ArchDescriptor b = a;
  b.provenance.search_epoch = 1;
  ShortlistConfig c;
  c.batches_per_arch = 3;
  c.batch_size = 4;
  const auto r = shortlist_train({a, b}, pool, transforms_for(8), c);
  ASSERT_EQ(r.candidates.size(), 2u);
  EXPECT_EQ(r.candidates[0].provenance.val_accuracy, r.candidates[1].provenance.val_accuracy);
  EXPECT_EQ(r.candidates[0].provenance.val_loss, r.candidates[1].provenance.val_loss);
  EXPECT_EQ(r.best.provenance.search_epoch, 1);  // tie goes to the later epoch
}

TEST(Evaluate, CalibratesUntrainedNetworkAndScoresNearChance) {
  const auto vols = noise_volumes(30, 8, 9);
  TrainConfig c;
  c.epochs = 0;
  c.batch_size = 6;
  ArchDescriptor a{tiny_config(), {1, 2, 3, 4, 5}, {}};
  const auto r = train_child(a, vols, vols, transforms_for(8), c);
  EXPECT_TRUE(r.epoch_losses.empty());
  EXPECT_EQ(r.test.predictions.size(), 30u);
  EXPECT_LT(r.report.accuracy, 0.7);
  EXPECT_GT(r.report.model_size_mb, 0.0);
}

TEST(TrainChild, DeterministicUnderFixedSeed) {
  const auto vols = noise_volumes(12, 8, 10);
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 5;
  ArchDescriptor a{tiny_config(), {0, 7, 3, 7, 1}, {}};
  const auto r1 = train_child(a, vols, vols, transforms_for(8), c);
  const auto r2 = train_child(a, vols, vols, transforms_for(8), c);
  EXPECT_EQ(r1.epoch_losses, r2.epoch_losses);
  EXPECT_EQ(r1.test.predictions, r2.test.predictions);
  EXPECT_EQ(r1.test.loss, r2.test.loss);
}
