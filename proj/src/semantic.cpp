#include "ldamend/semantic.hpp"

#include <algorithm>
#include <numeric>

#include "ldamend/errors.hpp"

namespace ldamend {

AutoEncoder AutoEncoder::create(Index d_in, Index d_sem, Index hidden, Rng& rng) {
  AutoEncoder ae;
  ae.encoder = Mlp<double>::create({d_in, hidden, d_sem}, Activation::relu, Activation::identity, rng);
  ae.decoder = Mlp<double>::create({d_sem, hidden, d_in}, Activation::relu, Activation::identity, rng);
  return ae;
}

void AutoEncoder::validate(Index d_sem) const {
  if (encoder.out_dim() != d_sem || decoder.in_dim() != d_sem)
    throw DimensionError("autoencoder code size does not match the vocabulary dimension " + std::to_string(d_sem));
  if (decoder.out_dim() != encoder.in_dim()) throw DimensionError("autoencoder decoder does not reconstruct its input size");
}

VectorXd AutoEncoder::encode(const VectorXd& x) const { return encoder.forward(x); }
MatrixXd AutoEncoder::encode(const MatrixXd& x) const { return encoder.forward(x); }

void SemanticConfig::validate() const {
  if (!(gamma >= 0)) throw ConfigError("semantic gamma must be nonnegative");
  if (epochs < 0) throw ConfigError("semantic epochs must be nonnegative");
  if (batch_size < 1) throw ConfigError("semantic batch size must be positive");
  if (hidden < 1) throw ConfigError("semantic hidden width must be positive");
  if (!(optimizer.learning_rate > 0)) throw ConfigError("semantic learning rate must be positive");
}

SemanticLoss semantic_loss(const MatrixXd& x, std::span<const int> labels, const EmotionVocabulary& vocab,
                           const AutoEncoder& ae, double gamma) {
  const Index batch = x.cols();
  if (batch == 0 || static_cast<Index>(labels.size()) != batch)
    throw DimensionError("semantic loss needs one label per sample column");
  ae.validate(vocab.dim());

  ForwardCache<double> enc_cache, dec_cache;
  const MatrixXd g = ae.encoder.forward(x, &enc_cache);
  const MatrixXd xhat = ae.decoder.forward(g, &dec_cache);

  const double d = static_cast<double>(x.rows());
  const double inv_b = 1.0 / static_cast<double>(batch);
  const MatrixXd diff = xhat - x;

  SemanticLoss out;
  out.reconstruction = diff.squaredNorm() / d * inv_b;

  MatrixXd g_grad_align(g.rows(), batch);
  double align = 0;
  for (Index i = 0; i < batch; ++i) {
    const VectorXd v = word_vector(vocab, labels[static_cast<std::size_t>(i)]);
    const VectorXd gi = g.col(i);
    align += 1.0 - cosine_similarity(v, gi);
    g_grad_align.col(i) = -gamma * inv_b * cosine_similarity_grad(gi, v);
  }
  out.alignment = align * inv_b;
  out.loss = out.reconstruction + gamma * out.alignment;

  const MatrixXd xhat_grad = (2.0 / d * inv_b) * diff;
  const auto dec = ae.decoder.backward(dec_cache, xhat_grad);
  const MatrixXd g_grad = dec.input_grad + g_grad_align;
  const auto enc = ae.encoder.backward(enc_cache, g_grad);
  out.encoder_grad = flatten(enc.layers);
  out.decoder_grad = flatten(dec.layers);
  return out;
}

SemanticLoss semantic_loss(const VectorXd& x, int label, const EmotionVocabulary& vocab, const AutoEncoder& ae,
                           double gamma) {
  const int labels[1] = {label};
  return semantic_loss(MatrixXd(x), std::span<const int>(labels, 1), vocab, ae, gamma);
}

double mean_alignment(const AutoEncoder& ae, const Dataset& data, const EmotionVocabulary& vocab) {
  if (data.empty()) throw DimensionError("empty dataset");
  const MatrixXd g = ae.encode(data.feature_matrix());
  double total = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total += cosine_similarity(word_vector(vocab, data.samples[i].label), VectorXd(g.col(static_cast<Index>(i))));
  return total / static_cast<double>(data.size());
}

AutoEncoderTraining train_autoencoder(const Dataset& data, const EmotionVocabulary& vocab, const SemanticConfig& config) {
  config.validate();
  vocab.validate();
  if (data.empty()) throw DimensionError("cannot train the autoencoder on an empty dataset");
  data.validate(static_cast<int>(vocab.size()));

  Rng rng(config.seed);
  AutoEncoderTraining out{AutoEncoder::create(data.dim(), vocab.dim(), config.hidden, rng), {}, {}};
  auto& ae = out.model;

  const MatrixXd x = data.feature_matrix();
  const std::vector<int> labels = data.labels();
  const Index n_enc = ae.encoder.parameter_count();
  Optimizer<double> enc_opt(config.optimizer, n_enc);
  Optimizer<double> dec_opt(config.optimizer, ae.decoder.parameter_count());

  out.alignment_history.push_back(mean_alignment(ae, data, vocab));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      MatrixXd xb(x.rows(), static_cast<Index>(end - start));
      std::vector<int> yb;
      for (std::size_t j = start; j < end; ++j) {
        xb.col(static_cast<Index>(j - start)) = x.col(static_cast<Index>(order[j]));
        yb.push_back(labels[order[j]]);
      }
      const SemanticLoss l = semantic_loss(xb, yb, vocab, ae, config.gamma);
      if (!std::isfinite(l.loss)) throw NumericError("autoencoder loss diverged");
      epoch_loss += l.loss * static_cast<double>(end - start);
      VectorXd p = ae.encoder.parameters();
      enc_opt.step(p, l.encoder_grad);
      ae.encoder.set_parameters(p);
      p = ae.decoder.parameters();
      dec_opt.step(p, l.decoder_grad);
      ae.decoder.set_parameters(p);
    }
    out.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
    out.alignment_history.push_back(mean_alignment(ae, data, vocab));
  }
  return out;
}

CRGraph semantic_crgraph(const EmotionVocabulary& vocab, const VectorXd& g) {
  if (g.size() != vocab.dim()) throw DimensionError("semantic feature size does not match the vocabulary dimension");
  if (!(g.norm() > 0)) throw NumericError("semantic feature has zero norm");
  CRGraph s(vocab.size());
  for (Index k = 0; k < vocab.size(); ++k) s[k] = cosine_similarity(VectorXd(vocab.vectors.row(k).transpose()), g);
  return s;
}

}  // namespace ldamend
