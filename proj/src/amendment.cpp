#include "ldamend/amendment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ldamend/errors.hpp"

namespace ldamend {

std::string_view to_string(PrototypeMode m) {
  return m == PrototypeMode::weighted_mean ? "weighted_mean" : "count_scaled";
}

std::string_view to_string(AlphaNormalization n) {
  return n == AlphaNormalization::raw ? "raw" : "class_mean_one";
}

PrototypeMode prototype_mode_from_string(std::string_view s) {
  if (s == "weighted_mean") return PrototypeMode::weighted_mean;
  if (s == "count_scaled") return PrototypeMode::count_scaled;
  throw ConfigError("unknown prototype mode: " + std::string(s));
}

AlphaNormalization alpha_normalization_from_string(std::string_view s) {
  if (s == "raw") return AlphaNormalization::raw;
  if (s == "class_mean_one") return AlphaNormalization::class_mean_one;
  throw ConfigError("unknown alpha normalization: " + std::string(s));
}

// --- TaskModel ---------------------------------------------------------------

TaskModel TaskModel::create(Index d_in, std::span<const Index> hidden, Index feature_dim, Index num_classes,
                            Activation feature_activation, Rng& rng) {
  std::vector<Index> dims{d_in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(feature_dim);
  TaskModel m;
  m.backbone = Mlp<double>::create(dims, Activation::relu, feature_activation, rng);
  m.head = Mlp<double>::create({feature_dim, num_classes}, Activation::identity, Activation::identity, rng);
  return m;
}

void TaskModel::validate() const {
  if (head.depth() != 1) throw DimensionError("task head must be a single layer");
  if (head.in_dim() != backbone.out_dim()) throw DimensionError("task head does not match the backbone feature size");
}

VectorXd TaskModel::parameters() const {
  VectorXd p(parameter_count());
  p << backbone.parameters(), head.parameters();
  return p;
}

void TaskModel::set_parameters(const VectorXd& p) {
  if (p.size() != parameter_count()) throw DimensionError("task model parameter vector has the wrong size");
  backbone.set_parameters(p.head(backbone.parameter_count()));
  head.set_parameters(p.tail(head.parameter_count()));
}

MatrixXd TaskModel::logits(const MatrixXd& x) const { return head.forward(backbone.forward(x)); }

// --- Prototypes --------------------------------------------------------------

bool Prototypes::complete() const { return std::all_of(valid.begin(), valid.end(), [](bool v) { return v; }); }

std::vector<Index> Prototypes::valid_classes() const {
  std::vector<Index> keep;
  for (std::size_t k = 0; k < valid.size(); ++k)
    if (valid[k]) keep.push_back(static_cast<Index>(k));
  return keep;
}

void Prototypes::require_complete() const {
  for (std::size_t k = 0; k < valid.size(); ++k)
    if (!valid[k]) throw EmptyClassError(static_cast<int>(k) + 1);
}

Prototypes Prototypes::restricted(const std::vector<Index>& keep) const {
  Prototypes out;
  out.mode = mode;
  out.centers.resize(static_cast<Index>(keep.size()), centers.cols());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    out.centers.row(static_cast<Index>(a)) = centers.row(keep[a]);
    out.valid.push_back(valid.at(static_cast<std::size_t>(keep[a])));
  }
  return out;
}

void EngineConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(epsilon_conf > 0)) throw ConfigError("epsilon_conf must be positive");
  if (!(epsilon_dist > 0)) throw ConfigError("epsilon_dist must be positive");
  if (epochs < 0 || warmup_epochs < 0 || warmup_epochs > epochs)
    throw ConfigError("need 0 <= warmup_epochs <= epochs");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  for (Index h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be positive");
  if (!(optimizer.learning_rate > 0)) throw ConfigError("learning rate must be positive");
}

MatrixXd extract_features(const TaskModel& model, const Dataset& data) {
  if (data.dim() != model.in_dim() && !data.empty())
    throw DimensionError("dataset has " + std::to_string(data.dim()) + " features, model expects " +
                         std::to_string(model.in_dim()));
  if (data.empty()) return MatrixXd(0, model.feature_dim());
  return model.backbone.forward(data.feature_matrix()).transpose();
}

Prototypes compute_prototypes(const MatrixXd& features, std::span<const int> labels, const VectorXd& alpha,
                              PrototypeMode mode, int num_classes) {
  const Index n = features.rows();
  if (static_cast<Index>(labels.size()) != n || alpha.size() != n)
    throw DimensionError("prototype inputs need one label and one alpha per feature row");
  Prototypes p;
  p.mode = mode;
  p.centers = MatrixXd::Zero(num_classes, features.cols());
  VectorXd weight = VectorXd::Zero(num_classes);
  std::vector<long> count(static_cast<std::size_t>(num_classes), 0);
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 1 || y > num_classes) throw RangeError("label " + std::to_string(y) + " out of range");
    if (!(alpha[i] > 0)) throw RangeError("confidence weights must be positive");
    p.centers.row(y - 1) += alpha[i] * features.row(i);
    weight[y - 1] += alpha[i];
    ++count[static_cast<std::size_t>(y - 1)];
  }
  p.valid.assign(static_cast<std::size_t>(num_classes), true);
  for (int k = 0; k < num_classes; ++k) {
    const auto nk = count[static_cast<std::size_t>(k)];
    if (nk == 0) {
      p.valid[static_cast<std::size_t>(k)] = false;
      continue;
    }
    p.centers.row(k) /= mode == PrototypeMode::weighted_mean ? weight[k] : static_cast<double>(nk);
  }
  if (!p.centers.allFinite()) throw NumericError("prototype computation produced non-finite centers");
  return p;
}

CRGraph task_crgraph(const Prototypes& prototypes, const VectorXd& feature) {
  prototypes.require_complete();
  if (feature.size() != prototypes.centers.cols()) throw DimensionError("feature size does not match prototypes");
  if (!(feature.norm() > 0)) throw NumericError("task feature has zero norm");
  CRGraph s(prototypes.num_classes());
  for (Index k = 0; k < prototypes.num_classes(); ++k) {
    const VectorXd pk = prototypes.centers.row(k).transpose();
    if (!(pk.norm() > 0)) throw NumericError("prototype " + std::to_string(k + 1) + " has zero norm");
    s[k] = cosine_similarity(pk, feature);
  }
  return s;
}

ConfidenceVector normalize_confidences(const VectorXd& raw, std::span<const int> labels, AlphaNormalization mode) {
  if (static_cast<Index>(labels.size()) != raw.size()) throw DimensionError("one label per confidence required");
  ConfidenceVector out{raw, mode};
  if (mode == AlphaNormalization::raw) return out;
  const int c = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  VectorXd sum = VectorXd::Zero(c + 1);
  std::vector<long> count(static_cast<std::size_t>(c + 1), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum[labels[i]] += raw[static_cast<Index>(i)];
    ++count[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double mean = sum[labels[i]] / static_cast<double>(count[static_cast<std::size_t>(labels[i])]);
    out.alpha[static_cast<Index>(i)] = raw[static_cast<Index>(i)] / mean;
  }
  return out;
}

ConfidenceVector compute_confidences(const std::vector<CRGraph>& semantic_graphs, const std::vector<CRGraph>& task_graphs,
                                     std::span<const int> labels, const EngineConfig& config, const GroundCost& cost) {
  if (semantic_graphs.size() != task_graphs.size() || labels.size() != task_graphs.size())
    throw DimensionError("confidence inputs differ in sample count");
  VectorXd raw(static_cast<Index>(task_graphs.size()));
  for (std::size_t i = 0; i < task_graphs.size(); ++i)
    raw[static_cast<Index>(i)] = confidence(semantic_graphs[i], task_graphs[i], config.epsilon_conf, cost);
  return normalize_confidences(raw, labels, config.alpha_normalization);
}

LabelDistribution amend_distribution(const VectorXd& feature, const Prototypes& prototypes, double epsilon_dist) {
  prototypes.require_complete();
  if (!(epsilon_dist > 0)) throw ConfigError("epsilon_dist must be positive");
  if (feature.size() != prototypes.centers.cols()) throw DimensionError("feature size does not match prototypes");
  VectorXd l(prototypes.num_classes());
  for (Index k = 0; k < l.size(); ++k)
    l[k] = 1.0 / ((feature - prototypes.centers.row(k).transpose()).squaredNorm() + epsilon_dist);
  return l / l.sum();
}

LossAndGrad<double> total_loss(const VectorXd& logits, int label, const LabelDistribution& l, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw RangeError("beta must lie in [0, 1]");
  if (label < 1 || label > logits.size()) throw RangeError("label out of range");
  if (l.size() != logits.size()) throw DimensionError("label distribution length does not match the logits");
  if (!on_simplex(l)) throw RangeError("label distribution is not on the simplex");
  VectorXd onehot = VectorXd::Zero(logits.size());
  onehot[label - 1] = 1.0;
  const auto hard = cross_entropy(onehot, logits);
  const auto soft = cross_entropy(l, logits);
  const VectorXd target = beta * onehot + (1.0 - beta) * l;
  return {beta * hard.loss + (1.0 - beta) * soft.loss, softmax(logits) - target};
}

double evaluate(const TaskModel& model, const Dataset& data) {
  if (data.empty()) throw DimensionError("cannot evaluate on an empty dataset");
  const MatrixXd z = model.logits(data.feature_matrix());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Index arg = 0;
    z.col(static_cast<Index>(i)).maxCoeff(&arg);
    if (arg + 1 == data.samples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// --- training ----------------------------------------------------------------

namespace {

struct AmendmentPass {
  Prototypes prototypes;
  VectorXd raw_alpha;
  ConfidenceVector alpha;
  VectorXd alpha_scale;
  std::vector<LabelDistribution> distributions;
  std::vector<int> skipped;
};

AmendmentPass run_amendment_pass(const TaskModel& model, const Dataset& data, std::span<const int> labels,
                                 const std::vector<CRGraph>& semantic_graphs, const VectorXd& alpha_prev,
                                 const EngineConfig& config, const GroundCost& cost) {
  const int c = static_cast<int>(model.num_classes());
  const MatrixXd features = extract_features(model, data);
  AmendmentPass pass;
  pass.prototypes = compute_prototypes(features, labels, alpha_prev, config.prototype_mode, c);
  const std::vector<Index> keep = pass.prototypes.valid_classes();
  for (int k = 0; k < c; ++k)
    if (!pass.prototypes.valid[static_cast<std::size_t>(k)]) pass.skipped.push_back(k + 1);

  const bool partial = !pass.skipped.empty();
  const Prototypes active = partial ? pass.prototypes.restricted(keep) : pass.prototypes;
  const GroundCost active_cost = partial ? cost.restricted(keep) : cost;

  const std::size_t n = data.size();
  std::vector<CRGraph> sem(n), task(n);
  pass.distributions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd f = features.row(static_cast<Index>(i)).transpose();
    if (partial) {
      sem[i].resize(static_cast<Index>(keep.size()));
      for (std::size_t a = 0; a < keep.size(); ++a) sem[i][static_cast<Index>(a)] = semantic_graphs[i][keep[a]];
    } else {
      sem[i] = semantic_graphs[i];
    }
    task[i] = task_crgraph(active, f);
    const LabelDistribution l = amend_distribution(f, active, config.epsilon_dist);
    if (partial) {
      pass.distributions[i] = VectorXd::Zero(c);
      for (std::size_t a = 0; a < keep.size(); ++a) pass.distributions[i][keep[a]] = l[static_cast<Index>(a)];
    } else {
      pass.distributions[i] = l;
    }
  }

  EngineConfig raw_config = config;
  raw_config.alpha_normalization = AlphaNormalization::raw;
  pass.raw_alpha = compute_confidences(sem, task, labels, raw_config, active_cost).alpha;
  pass.alpha = normalize_confidences(pass.raw_alpha, labels, config.alpha_normalization);

  pass.alpha_scale = VectorXd::Ones(c);
  VectorXd sum = VectorXd::Zero(c), cnt = VectorXd::Zero(c);
  for (std::size_t i = 0; i < n; ++i) {
    sum[labels[i] - 1] += pass.raw_alpha[static_cast<Index>(i)];
    cnt[labels[i] - 1] += 1.0;
  }
  for (int k = 0; k < c; ++k)
    if (cnt[k] > 0) pass.alpha_scale[k] = sum[k] / cnt[k];
  return pass;
}

void alpha_split(const Dataset& data, const VectorXd& alpha, EpochMetrics& m) {
  if (!data.flip_mask) return;
  double clean = 0, flipped = 0;
  long nc = 0, nf = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if ((*data.flip_mask)[i]) {
      flipped += alpha[static_cast<Index>(i)];
      ++nf;
    } else {
      clean += alpha[static_cast<Index>(i)];
      ++nc;
    }
  }
  if (nc > 0) m.alpha_clean = clean / static_cast<double>(nc);
  if (nf > 0) m.alpha_flipped = flipped / static_cast<double>(nf);
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset* test_set, const EmotionVocabulary& vocab,
                  const AutoEncoder& autoencoder, const EngineConfig& config) {
  config.validate();
  vocab.validate();
  if (train_set.empty()) throw DimensionError("cannot train on an empty dataset");
  const int c = static_cast<int>(vocab.size());
  train_set.validate(c);
  if (test_set) test_set->validate(c);
  autoencoder.validate(vocab.dim());
  if (autoencoder.encoder.in_dim() != train_set.dim())
    throw DimensionError("autoencoder input size does not match the dataset");

  Rng init_rng(derive_seed(config.seed, 1));
  Rng order_rng(derive_seed(config.seed, 2));

  TrainResult result;
  auto& pipe = result.pipeline;
  pipe.vocab = vocab;
  pipe.autoencoder = autoencoder;
  pipe.config = config;
  pipe.model = TaskModel::create(train_set.dim(), config.hidden, config.feature_dim, c, config.feature_activation,
                                 init_rng);
  auto& model = pipe.model;

  const GroundCost cost = GroundCost::from_kind(config.ground_cost, vocab);
  const std::vector<int> labels = train_set.labels();
  const MatrixXd x = train_set.feature_matrix();
  const std::size_t n = train_set.size();

  // Semantic graphs come from the frozen autoencoder and never change.
  std::vector<CRGraph> semantic_graphs(n);
  {
    const MatrixXd g = autoencoder.encode(x);
    for (std::size_t i = 0; i < n; ++i) semantic_graphs[i] = semantic_crgraph(vocab, g.col(static_cast<Index>(i)));
  }

  VectorXd alpha = VectorXd::Ones(static_cast<Index>(n));
  std::vector<LabelDistribution> dist;
  Optimizer<double> opt(config.optimizer, model.parameter_count());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.amended = epoch >= config.warmup_epochs;
    if (m.amended) {
      AmendmentPass pass = run_amendment_pass(model, train_set, labels, semantic_graphs, alpha, config, cost);
      alpha = pass.alpha.alpha;
      dist = std::move(pass.distributions);
      m.skipped_classes = std::move(pass.skipped);
      alpha_split(train_set, alpha, m);
    }

    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      const Index b = static_cast<Index>(end - start);
      MatrixXd xb(x.rows(), b);
      for (Index j = 0; j < b; ++j) xb.col(j) = x.col(static_cast<Index>(order[start + static_cast<std::size_t>(j)]));

      ForwardCache<double> bb_cache, head_cache;
      const MatrixXd feats = model.backbone.forward(xb, &bb_cache);
      const MatrixXd z = model.head.forward(feats, &head_cache);
      MatrixXd dz(z.rows(), b);
      for (Index j = 0; j < b; ++j) {
        const std::size_t i = order[start + static_cast<std::size_t>(j)];
        const VectorXd zj = z.col(j);
        if (m.amended) {
          const auto lg = total_loss(zj, labels[i], dist[i], config.beta);
          epoch_loss += lg.loss;
          dz.col(j) = lg.grad;
        } else {
          VectorXd onehot = VectorXd::Zero(c);
          onehot[labels[i] - 1] = 1.0;
          const auto lg = cross_entropy(onehot, zj);
          epoch_loss += lg.loss;
          dz.col(j) = lg.grad;
        }
      }
      dz /= static_cast<double>(b);
      const auto head_grad = model.head.backward(head_cache, dz);
      const auto bb_grad = model.backbone.backward(bb_cache, head_grad.input_grad);
      VectorXd grad(model.parameter_count());
      grad << flatten(bb_grad.layers), flatten(head_grad.layers);
      VectorXd params = model.parameters();
      opt.step(params, grad);
      model.set_parameters(params);
    }
    if (!std::isfinite(epoch_loss)) throw NumericError("task training diverged at epoch " + std::to_string(epoch));
    m.loss = epoch_loss / static_cast<double>(n);
    m.train_accuracy = evaluate(model, train_set);
    if (test_set && !test_set->empty()) m.test_accuracy = evaluate(model, *test_set);
    result.metrics.push_back(std::move(m));
  }

  // Closing pass on the final model so the reported confidences,
  // distributions and stored prototypes all describe the returned network.
  AmendmentPass pass = run_amendment_pass(model, train_set, labels, semantic_graphs, alpha, config, cost);
  pipe.prototypes = std::move(pass.prototypes);
  pipe.alpha_scale = std::move(pass.alpha_scale);
  result.confidences = std::move(pass.alpha);
  result.distributions = std::move(pass.distributions);
  return result;
}

Prediction predict_with_distribution(const TrainedPipeline& pipeline, const VectorXd& x, std::optional<int> given_label) {
  const auto& model = pipeline.model;
  const auto& cfg = pipeline.config;
  const int c = static_cast<int>(model.num_classes());
  if (given_label && (*given_label < 1 || *given_label > c)) throw RangeError("given label out of range");

  const MatrixXd xm = x;
  const VectorXd f = model.backbone.forward(xm).col(0);
  const VectorXd z = model.head.forward(MatrixXd(f)).col(0);
  Prediction out;
  Index arg = 0;
  z.maxCoeff(&arg);
  out.label = static_cast<int>(arg) + 1;

  const std::vector<Index> keep = pipeline.prototypes.valid_classes();
  const bool partial = static_cast<int>(keep.size()) != c;
  const Prototypes active = partial ? pipeline.prototypes.restricted(keep) : pipeline.prototypes;
  GroundCost cost = GroundCost::from_kind(cfg.ground_cost, pipeline.vocab);
  if (partial) cost = cost.restricted(keep);

  const LabelDistribution l = amend_distribution(f, active, cfg.epsilon_dist);
  const CRGraph sem_full = semantic_crgraph(pipeline.vocab, pipeline.autoencoder.encode(xm).col(0));
  CRGraph sem = sem_full;
  if (partial) {
    sem.resize(static_cast<Index>(keep.size()));
    for (std::size_t a = 0; a < keep.size(); ++a) sem[static_cast<Index>(a)] = sem_full[keep[a]];
    out.distribution = VectorXd::Zero(c);
    for (std::size_t a = 0; a < keep.size(); ++a) out.distribution[keep[a]] = l[static_cast<Index>(a)];
  } else {
    out.distribution = l;
  }
  const double raw = confidence(sem, task_crgraph(active, f), cfg.epsilon_conf, cost);
  const int group = given_label ? *given_label : out.label;
  out.alpha = cfg.alpha_normalization == AlphaNormalization::raw ? raw : raw / pipeline.alpha_scale[group - 1];
  return out;
}

}  // namespace ldamend
