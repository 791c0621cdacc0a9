#include "dnas3d/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "dnas3d/errors.hpp"

namespace dnas3d {

using nlohmann::json;

void SearchConfig::validate() const {
  if (epochs < 0) throw ConfigError("search epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(tau_start > 0.0) || !(tau_end > 0.0)) throw ConfigError("temperatures must be positive");
  if (tau_end > tau_start) throw ConfigError("tau schedule must be nonincreasing (tau_end <= tau_start)");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0,1)");
}

Batch make_batch(const std::vector<Volume>& volumes, std::span<const std::size_t> indices,
                 const TransformConfig& transforms, Split split, Rng& rng) {
  if (indices.empty()) throw ArgumentError("make_batch: empty batch");
  std::vector<Array> items;
  Batch b;
  for (auto i : indices) {
    items.push_back(preprocess(volumes.at(i), transforms, split, rng));
    b.labels.push_back(volumes[i].label);
  }
  const Shape& s = items[0].shape();
  const std::size_t per = items[0].size();
  std::vector<double> data;
  data.reserve(per * items.size());
  for (const auto& a : items) data.insert(data.end(), a.data().begin(), a.data().end());
  b.input = Tensor(Array(Shape{items.size(), 1, s[1], s[2], s[3]}, std::move(data)));
  return b;
}

std::vector<std::vector<std::size_t>> make_chunks(const std::vector<std::size_t>& order, int batch_size,
                                                  bool drop_singleton) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += std::size_t(batch_size)) {
    const std::size_t end = std::min(order.size(), i + std::size_t(batch_size));
    if (drop_singleton && end - i == 1 && !out.empty()) break;
    out.emplace_back(order.begin() + long(i), order.begin() + long(end));
  }
  return out;
}

namespace {

void check_finite(double loss, const std::string& where) {
  if (!std::isfinite(loss)) throw NumericError("non-finite loss during " + where);
}

std::vector<std::size_t> shuffled(std::vector<std::size_t> v, Rng& rng) {
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

std::vector<Volume> subset(const std::vector<Volume>& vols, const std::vector<std::size_t>& idx) {
  std::vector<Volume> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(vols[i]);
  return out;
}

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

int argmax_row(const Array& logits, std::size_t b) {
  const std::size_t K = logits.dim(1);
  const auto row = logits.data().subspan(b * K, K);
  return int(std::max_element(row.begin(), row.end()) - row.begin());
}

// Runs one no-grad train-mode pass when any listed BN is uninitialized,
// restoring every state that was already initialized.
template <typename Forward>
void calibrate_states(const std::vector<NamedState>& states, const std::vector<Volume>& volumes,
                      const TransformConfig& transforms, int batch_size, Rng& rng, Forward&& forward) {
  const bool needed = std::any_of(states.begin(), states.end(), [](const NamedState& s) { return !s.state->initialized; });
  if (!needed || volumes.empty()) return;
  std::vector<std::pair<BatchNormState*, BatchNormState>> saved;
  for (const auto& s : states)
    if (s.state->initialized) saved.emplace_back(s.state, *s.state);
  NoGradGuard guard;
  for (const auto& chunk : make_chunks(iota_n(volumes.size()), batch_size, true)) {
    Batch b = make_batch(volumes, chunk, transforms, Split::test, rng);
    forward(b.input);
  }
  for (auto& [ptr, copy] : saved) *ptr = copy;
}

struct SupernetEval {
  double loss = 0.0;
  double accuracy = 0.0;
};

SupernetEval evaluate_supernet(Supernet& net, std::span<const int> selections, const std::vector<Volume>& vols,
                               const TransformConfig& transforms, int batch_size) {
  NoGradGuard guard;
  Rng unused(0);
  double loss = 0.0;
  long correct = 0;
  for (const auto& chunk : make_chunks(iota_n(vols.size()), batch_size, false)) {
    Batch b = make_batch(vols, chunk, transforms, Split::test, unused);
    auto out = net.forward(b.input, selections, Mode::eval);
    loss += softmax_cross_entropy(out.logits, b.labels).item() * double(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) correct += argmax_row(out.logits.value(), i) == b.labels[i];
  }
  return {loss / double(vols.size()), double(correct) / double(vols.size())};
}

}  // namespace

double alpha_gradient(Supernet& net, GumbelSampler& sampler, const Batch& val, std::vector<int>& selections) {
  net.set_weights_requires_grad(false);
  net.alpha().tensor.set_requires_grad(true);
  auto gated = sample_architecture(sampler, net.alpha().tensor, true);
  selections = gated.selections;
  auto out = net.forward(val.input, gated.selections, Mode::train, gated.gates);
  Tensor loss = softmax_cross_entropy(out.logits, val.labels);
  check_finite(loss.item(), "architecture phase (validation loss)");
  loss.backward();
  net.set_weights_requires_grad(true);
  return loss.item();
}

double weight_gradient(Supernet& net, std::span<const int> selections, const Batch& train) {
  net.alpha().tensor.set_requires_grad(false);
  net.set_weights_requires_grad(true);
  auto out = net.forward(train.input, selections, Mode::train);
  Tensor loss = softmax_cross_entropy(out.logits, train.labels);
  check_finite(loss.item(), "weight phase (training loss)");
  loss.backward();
  net.alpha().tensor.set_requires_grad(true);
  return loss.item();
}

StepStats search_step(Supernet& net, GumbelSampler& sampler, const Batch& train, const Batch& val,
                      Optimizer& alpha_opt, Optimizer& weight_opt, bool resample_per_phase) {
  StepStats s;
  s.val_loss = alpha_gradient(net, sampler, val, s.alpha_selections);
  Parameter* alpha = &net.alpha();
  alpha_opt.step(std::span<Parameter* const>(&alpha, 1));

  if (resample_per_phase) {
    s.weight_selections = sample_architecture(sampler, net.alpha().tensor, false).selections;
  } else {
    s.weight_selections = s.alpha_selections;
  }
  s.train_loss = weight_gradient(net, s.weight_selections, train);
  auto refs = net.refs_for(s.weight_selections);
  weight_opt.step(refs.params);
  return s;
}

SplitIndices search_split(const std::vector<Volume>& train_pool, double val_fraction, std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& v : train_pool) labels.push_back(v.label);
  Rng rng = make_rng(seed, Stream::split);
  return stratified_split(labels, val_fraction, rng);
}

SearchHistory run_search(Supernet& net, const std::vector<Volume>& train_pool, const TransformConfig& transforms,
                         const SearchConfig& config, const SearchProgress& progress) {
  config.validate();
  transforms.validate();
  std::map<int, int> per_class;
  for (const auto& v : train_pool) ++per_class[v.label];
  if (per_class.size() < 2) throw ConfigError("search needs at least two classes in the training data");

  const auto parts = search_split(train_pool, config.val_fraction, config.seed);
  if (parts.first.empty() || parts.second.empty()) throw ConfigError("empty D_T or D_V split");
  const auto d_train = subset(train_pool, parts.first);
  const auto d_val = subset(train_pool, parts.second);

  Rng data_rng = make_rng(config.seed, Stream::data);
  GumbelSampler sampler(config.tau_start, make_rng(config.seed, Stream::architecture));
  Optimizer alpha_opt = Optimizer::adam({config.alpha_lr, 0.9, 0.999, 1e-8, 0.0});
  Optimizer weight_opt = Optimizer::sgd({config.weight_lr, config.weight_momentum, config.weight_decay});

  SearchHistory history;
  history.config = net.config();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double tau = tau_schedule(epoch, config.epochs, config.tau_start, config.tau_end);
    sampler.set_tau(tau);
    const auto train_chunks = make_chunks(shuffled(iota_n(d_train.size()), data_rng), config.batch_size, true);
    const auto val_chunks = make_chunks(shuffled(iota_n(d_val.size()), data_rng), config.batch_size, true);
    double train_loss = 0.0;
    for (std::size_t step = 0; step < train_chunks.size(); ++step) {
      Batch tb = make_batch(d_train, train_chunks[step], transforms, Split::train, data_rng);
      Batch vb = make_batch(d_val, val_chunks[step % val_chunks.size()], transforms, Split::test, data_rng);
      try {
        train_loss += search_step(net, sampler, tb, vb, alpha_opt, weight_opt, config.resample_per_phase).train_loss;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      }
    }

    SearchRecord rec;
    rec.epoch = epoch;
    rec.tau = tau;
    rec.train_loss = train_chunks.empty() ? 0.0 : train_loss / double(train_chunks.size());
    rec.choices = argmax_rows(net.alpha().tensor.value());
    calibrate_states(net.refs_for(rec.choices).bn_states, d_train, transforms, config.batch_size, data_rng,
                     [&](const Tensor& x) { net.forward(x, rec.choices, Mode::train); });
    const auto ev = evaluate_supernet(net, rec.choices, d_val, transforms, config.batch_size);
    rec.val_loss = ev.loss;
    rec.val_accuracy = ev.accuracy;
    history.records.push_back(rec);
    if (progress) progress(rec);
  }
  return history;
}

ArchDescriptor SearchHistory::descriptor(std::size_t i) const {
  const auto& r = records.at(i);
  ArchDescriptor a;
  a.config = config;
  a.choices = r.choices;
  a.provenance = {r.epoch, r.val_accuracy, r.val_loss};
  return a;
}

json to_json(const SearchHistory& h) {
  json recs = json::array();
  for (const auto& r : h.records)
    recs.push_back({{"epoch", r.epoch},
                    {"choices", r.choices},
                    {"val_loss", r.val_loss},
                    {"val_accuracy", r.val_accuracy},
                    {"tau", r.tau},
                    {"train_loss", r.train_loss}});
  return json{{"format_version", 1}, {"config", to_json(h.config)}, {"records", recs}};
}

SearchHistory history_from_json(const json& j) {
  try {
    SearchHistory h;
    h.config = supernet_config_from_json(j.at("config"));
    for (const auto& r : j.at("records")) {
      SearchRecord rec;
      rec.epoch = r.at("epoch").get<int>();
      rec.choices = r.at("choices").get<std::vector<int>>();
      rec.val_loss = r.at("val_loss").get<double>();
      rec.val_accuracy = r.at("val_accuracy").get<double>();
      rec.tau = r.at("tau").get<double>();
      rec.train_loss = r.value("train_loss", 0.0);
      if (int(rec.choices.size()) != h.config.num_positions())
        throw ConfigError("history record has the wrong number of choices");
      if (!h.records.empty() && rec.epoch <= h.records.back().epoch)
        throw ConfigError("history epochs must be strictly increasing");
      h.records.push_back(std::move(rec));
    }
    return h;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed search history: ") + e.what());
  }
}

void save_history(const std::string& path, const SearchHistory& h) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << to_json(h).dump(2) << '\n';
}

SearchHistory load_history(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  try {
    return history_from_json(json::parse(is));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("search history is not valid JSON: ") + e.what());
  }
}

namespace {
// Strict "a ranks before b": higher accuracy, lower loss, later epoch.
bool ranks_before(const Provenance& a, const Provenance& b) {
  if (a.val_accuracy != b.val_accuracy) return a.val_accuracy > b.val_accuracy;
  if (a.val_loss != b.val_loss) return a.val_loss < b.val_loss;
  return a.search_epoch > b.search_epoch;
}
}  // namespace

std::vector<ArchDescriptor> select_top_k(const SearchHistory& history, int k) {
  if (history.records.empty()) throw StateError("select_top_k on an empty history");
  if (k < 1) throw ArgumentError("k must be >= 1");
  std::vector<ArchDescriptor> all;
  for (std::size_t i = 0; i < history.records.size(); ++i) all.push_back(history.descriptor(i));
  std::stable_sort(all.begin(), all.end(),
                   [](const ArchDescriptor& a, const ArchDescriptor& b) { return ranks_before(a.provenance, b.provenance); });
  if (all.size() > std::size_t(k)) all.resize(std::size_t(k));
  return all;
}

void calibrate_batchnorm(ChildNet& net, const std::vector<Volume>& volumes, const TransformConfig& transforms,
                         int batch_size, Rng& rng) {
  calibrate_states(net.refs().bn_states, volumes, transforms, batch_size, rng,
                   [&](const Tensor& x) { net.forward(x, Mode::train); });
}

EvalResult evaluate(ChildNet& net, const std::vector<Volume>& volumes, const TransformConfig& transforms,
                    int batch_size) {
  if (volumes.empty()) throw ConfigError("evaluate: no volumes");
  NoGradGuard guard;
  Rng unused(0);
  EvalResult r;
  double loss = 0.0;
  long correct = 0;
  for (const auto& chunk : make_chunks(iota_n(volumes.size()), batch_size, false)) {
    Batch b = make_batch(volumes, chunk, transforms, Split::test, unused);
    auto out = net.forward(b.input, Mode::eval);
    loss += softmax_cross_entropy(out.logits, b.labels).item() * double(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const int pred = argmax_row(out.logits.value(), i);
      r.predictions.push_back(pred);
      r.labels.push_back(b.labels[i]);
      correct += pred == b.labels[i];
    }
  }
  r.loss = loss / double(volumes.size());
  r.accuracy = double(correct) / double(volumes.size());
  return r;
}

namespace {

// Adam steps over `batches` mini-batches drawn from shuffled passes of `vols`.
double train_batches(ChildNet& net, Optimizer& opt, const std::vector<Volume>& vols,
                     const std::vector<std::vector<std::size_t>>& chunks, const TransformConfig& transforms, Rng& rng,
                     const std::string& where) {
  double total = 0.0;
  auto refs = net.refs();
  for (std::size_t step = 0; step < chunks.size(); ++step) {
    Batch b = make_batch(vols, chunks[step], transforms, Split::train, rng);
    auto out = net.forward(b.input, Mode::train);
    Tensor loss = softmax_cross_entropy(out.logits, b.labels);
    if (!std::isfinite(loss.item()))
      throw NumericError("non-finite loss during " + where + ", step " + std::to_string(step));
    loss.backward();
    opt.step(refs.params);
    total += loss.item();
  }
  return chunks.empty() ? 0.0 : total / double(chunks.size());
}

}  // namespace

ShortlistResult shortlist_train(const std::vector<ArchDescriptor>& archs, const std::vector<Volume>& train_pool,
                                const TransformConfig& transforms, const ShortlistConfig& config) {
  if (archs.empty()) throw StateError("shortlist_train needs at least one candidate");
  if (config.batches_per_arch < 1) throw ConfigError("batches_per_arch must be >= 1");
  ShortlistResult result;
  if (archs.size() == 1) {
    result.best = archs[0];
    result.candidates = archs;
    return result;
  }
  const auto parts = search_split(train_pool, config.val_fraction, config.seed);
  const auto d_train = subset(train_pool, parts.first);
  const auto d_val = subset(train_pool, parts.second);
  if (d_train.empty() || d_val.empty()) throw ConfigError("empty D_T or D_V split");

  for (const auto& arch : archs) {
    // Every candidate sees the same initialization seed and batch stream.
    ChildNet child(arch, config.seed);
    Rng rng = make_rng(config.seed, Stream::data, 0x5157);
    std::vector<std::vector<std::size_t>> chunks;
    while (int(chunks.size()) < config.batches_per_arch) {
      for (auto& c : make_chunks(shuffled(iota_n(d_train.size()), rng), config.batch_size, true)) {
        if (int(chunks.size()) == config.batches_per_arch) break;
        chunks.push_back(std::move(c));
      }
    }
    Optimizer opt = Optimizer::adam({config.learning_rate});
    train_batches(child, opt, d_train, chunks, transforms, rng, "shortlist training");
    const auto ev = evaluate(child, d_val, transforms, config.batch_size);
    ArchDescriptor scored = arch;
    scored.provenance.val_accuracy = ev.accuracy;
    scored.provenance.val_loss = ev.loss;
    result.candidates.push_back(scored);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.candidates.size(); ++i)
    if (ranks_before(result.candidates[i].provenance, result.candidates[best].provenance)) best = i;
  result.best = result.candidates[best];
  return result;
}

MetricsReport metrics_for(ChildNet& net, const EvalResult& eval, int positive_class) {
  return evaluate_predictions(eval.predictions, eval.labels, net.arch().config.num_classes, positive_class,
                              model_size_mb(net.param_count()));
}

TrainResult train_child(const ArchDescriptor& arch, const std::vector<Volume>& train, const std::vector<Volume>& test,
                        const TransformConfig& transforms, const TrainConfig& config, const TrainProgress& progress) {
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (train.empty()) throw ConfigError("train_child: empty training set");
  TrainResult r{ChildNet(arch, config.seed), {}, {}, {}};
  Rng rng = make_rng(config.seed, Stream::data);
  Optimizer opt = Optimizer::adam({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, config.epochs, config.learning_rate, config.lr_min);
    opt.set_learning_rate(lr);
    const auto chunks = make_chunks(shuffled(iota_n(train.size()), rng), config.batch_size, true);
    const double loss = train_batches(r.model, opt, train, chunks, transforms, rng, "epoch " + std::to_string(epoch));
    r.epoch_losses.push_back(loss);
    if (progress) progress(epoch, loss, lr);
  }
  calibrate_batchnorm(r.model, train, transforms, config.batch_size, rng);
  if (!test.empty()) {
    r.test = evaluate(r.model, test, transforms, config.batch_size);
    r.report = metrics_for(r.model, r.test, config.positive_class);
  }
  return r;
}

}  // namespace dnas3d
