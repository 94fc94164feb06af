// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Criteria 5-8 train full pipelines and take a few minutes.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ldamend/amendment.hpp"
#include "ldamend/checkpoint.hpp"
#include "ldamend/datagen.hpp"
#include "ldamend/experiment.hpp"
#include "ldamend/nn/gradcheck.hpp"
#include "oracles.hpp"
#include "plain_training.hpp"

using namespace ldamend;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

EmotionVocabulary fixture_vocab() { return load_word2vec_text(default_fixture_path(), default_emotion_words()); }

constexpr int kSeeds = 5;

// ---------------------------------------------------------------- 1
Outcome gradients() {
  const auto t0 = Clock::now();
  const auto vocab = fixture_vocab();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0, 1);
  double worst = 0;
  bool routed = true;
  int redrawn = 0;
  for (int t = 0, draw = 0; t < 50; ++draw) {
    Rng init(1000 + static_cast<std::uint64_t>(draw));
    const Index d_in = 3 + t % 6, b = 1 + t % 5;
    const auto ae = AutoEncoder::create(d_in, vocab.dim(), 4 + t % 9, init);
    MatrixXd x(d_in, b);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<int> labels;
    for (Index j = 0; j < b; ++j) labels.push_back(1 + static_cast<int>(rng() % 7));
    const double gamma = 0.1 + 0.1 * (t % 20);
    // a narrow ReLU encoder can map a column to g(x) = 0, where the cosine is undefined
    if ((ae.encode(x).colwise().norm().array() < 1e-3).any()) {
      ++redrawn;
      continue;
    }
    ++t;
    const auto res = semantic_loss(x, labels, vocab, ae, gamma);
    const auto enc_fd = finite_difference_grad(
        [&](const VectorXd& p) {
          AutoEncoder m = ae;
          m.encoder.set_parameters(p);
          return semantic_loss(x, labels, vocab, m, gamma).loss;
        },
        ae.encoder.parameters());
    const auto dec_fd = finite_difference_grad(
        [&](const VectorXd& p) {
          AutoEncoder m = ae;
          m.decoder.set_parameters(p);
          return semantic_loss(x, labels, vocab, m, gamma).loss;
        },
        ae.decoder.parameters());
    worst = std::max({worst, relative_error(res.encoder_grad, enc_fd), relative_error(res.decoder_grad, dec_fd)});
    // the cosine term leaves the decoder gradient untouched
    routed = routed && semantic_loss(x, labels, vocab, ae, 0.0).decoder_grad == res.decoder_grad;
  }
  for (int t = 0; t < 50; ++t) {
    const Index c = 2 + t % 7;
    VectorXd z(c);
    for (Index k = 0; k < c; ++k) z[k] = 3 * g(rng);
    const VectorXd l = oracle::random_simplex(rng, c);
    const int y = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(c));
    const double beta = static_cast<double>(t) / 49.0;
    const auto lg = total_loss(z, y, l, beta);
    const auto fd = finite_difference_grad([&](const VectorXd& zz) { return total_loss(zz, y, l, beta).loss; }, z);
    worst = std::max(worst, relative_error(lg.grad, fd));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && routed && secs < 30,
          "max rel err " + fmt("%.2e", worst) + ", decoder routing " + (routed ? "ok" : "BROKEN") + ", " + std::to_string(redrawn) + " degenerate draws skipped, " +
              fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------- 2
Outcome transport_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  double worst_closed = 0;
  for (Index c = 2; c <= 8; ++c) {
    const auto disc = GroundCost::discrete(c), lin = GroundCost::index_linear(c);
    for (int t = 0; t < 1000; ++t) {
      const VectorXd p = oracle::random_simplex(rng, c), q = oracle::random_simplex(rng, c);
      worst_closed = std::max(worst_closed, std::abs(wasserstein(p, q, disc).distance - oracle::total_variation(p, q)));
      worst_closed = std::max(worst_closed, std::abs(wasserstein(p, q, lin).distance - oracle::cdf_distance(p, q)));
    }
  }
  const auto vocab = fixture_vocab();
  const auto sem = GroundCost::semantic(vocab).restricted({0, 3, 6});
  double worst_grid = 0;
  for (int t = 0; t < 100; ++t) {
    const VectorXd p = oracle::random_simplex(rng, 3), q = oracle::random_simplex(rng, 3);
    worst_grid = std::max(worst_grid, std::abs(wasserstein(p, q, sem).distance - oracle::grid_search_c3(p, q, sem.matrix())));
  }
  const double secs = seconds_since(t0);
  return {worst_closed < 1e-9 && worst_grid < 1e-3 && secs < 60,
          "closed-form max err " + fmt("%.1e", worst_closed) + ", grid-search max err " + fmt("%.1e", worst_grid) + ", " +
              fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------- 3
Outcome invariants() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(-1, 1);
  auto random_matrix = [&](Index r, Index c) {
    MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
  };
  auto make_protos = [](const MatrixXd& centers) {
    Prototypes p;
    p.centers = centers;
    p.valid.assign(static_cast<std::size_t>(centers.rows()), true);
    return p;
  };
  long bad = 0;
  double worst_uniform = 0;
  for (int t = 0; t < 10000; ++t) {
    const Index c = 2 + t % 7, d = 1 + static_cast<Index>(rng() % 12);
    const MatrixXd centers = random_matrix(c, d);
    VectorXd f = random_matrix(d, 1);
    if (t % 10 == 0) f = centers.row(t % c).transpose();  // exactly on a prototype
    const auto l = amend_distribution(f, make_protos(centers), 1e-8);
    if (!(l.size() == c && (l.array() >= 0).all() && (l.array() <= 1).all() && std::abs(l.sum() - 1) < 1e-12)) ++bad;

    VectorXd s(c);
    for (Index k = 0; k < c; ++k) s[k] = u(rng);
    if (t % 50 == 0) s.setConstant(-1);
    const auto p = normalize_similarities(s);
    if (!(p.size() == c && (p.array() >= 0).all() && std::abs(p.sum() - 1) < 1e-12)) ++bad;

    EmotionVocabulary v;
    v.vectors = random_matrix(c, d);
    for (Index k = 0; k < c; ++k) v.words.push_back("w" + std::to_string(k));
    const auto ss = semantic_crgraph(v, random_matrix(d, 1));
    if (!(ss.size() == c && (ss.array().abs() <= 1).all())) ++bad;

    const auto st = task_crgraph(make_protos(centers), random_matrix(d, 1));
    if (!(st.size() == c && (st.array().abs() <= 1).all())) ++bad;

    // equidistant prototypes
    const double r = 0.05 + std::abs(g(rng));
    MatrixXd eq(c, d);
    for (Index k = 0; k < c; ++k) eq.row(k) = (f + r * random_matrix(d, 1).normalized()).transpose();
    const auto lu = amend_distribution(f, make_protos(eq), 1e-8);
    worst_uniform = std::max(worst_uniform, (lu.array() - 1.0 / static_cast<double>(c)).abs().maxCoeff());
  }
  return {bad == 0 && worst_uniform < 1e-9,
          std::to_string(bad) + " violations in 40000 calls, equidistant max deviation " + fmt("%.1e", worst_uniform)};
}

// ---------------------------------------------------------------- 4
Outcome baseline_equivalence() {
  ExperimentConfig cfg;
  cfg.noise_ratio = 0.2;
  cfg.apply_seed(1);
  const auto vocab = load_vocabulary(cfg);
  const auto data = prepare_data(cfg, vocab);
  const auto ae = train_autoencoder(data.train, vocab, cfg.semantic).model;
  const auto plain = oracle::plain_training(data.train, data.test, cfg.engine, vocab.size());
  auto same = [&](const TrainResult& r) {
    if (r.metrics.size() != plain.losses.size()) return false;
    for (std::size_t e = 0; e < plain.losses.size(); ++e)
      if (r.metrics[e].train_accuracy != plain.train_acc[e] || r.metrics[e].test_accuracy != plain.test_acc[e] ||
          std::abs(r.metrics[e].loss - plain.losses[e]) > 1e-12 * std::abs(plain.losses[e]))
        return false;
    return r.pipeline.model.parameters() == plain.params;
  };
  EngineConfig warm = cfg.engine;
  warm.warmup_epochs = warm.epochs;
  EngineConfig beta1 = cfg.engine;
  beta1.beta = 1.0;
  const bool a = same(train(data.train, &data.test, vocab, ae, warm));
  const bool b = same(train(data.train, &data.test, vocab, ae, beta1));
  return {a && b, std::string("warmup=epochs ") + (a ? "identical" : "DIFFERS") + ", beta=1 " + (b ? "identical" : "DIFFERS") +
                      ", final test acc " + fmt("%.4f", plain.test_acc.back())};
}

// ---------------------------------------------------------------- 5, 6
struct NoiseRun {
  double acc_a = 0, acc_b = 0, auc = 0, secs = 0;
};

NoiseRun noise_runs(double noise, double beta_a) {
  const auto t0 = Clock::now();
  NoiseRun out;
  for (int s = 1; s <= kSeeds; ++s) {
    ExperimentConfig cfg;
    cfg.noise_ratio = noise;
    cfg.apply_seed(static_cast<std::uint64_t>(s));
    const auto vocab = load_vocabulary(cfg);
    const auto data = prepare_data(cfg, vocab);
    const auto ae = train_autoencoder(data.train, vocab, cfg.semantic).model;
    EngineConfig a = cfg.engine, b = cfg.engine;
    a.beta = beta_a;
    b.beta = 1.0;
    const auto ra = train(data.train, &data.test, vocab, ae, a);
    const auto rb = train(data.train, &data.test, vocab, ae, b);
    out.acc_a += *ra.metrics.back().test_accuracy / kSeeds;
    out.acc_b += *rb.metrics.back().test_accuracy / kSeeds;
    std::vector<double> score;
    for (Index i = 0; i < ra.confidences.alpha.size(); ++i) score.push_back(-ra.confidences.alpha[i]);
    out.auc += oracle::roc_auc(score, *data.train.flip_mask) / kSeeds;
  }
  out.secs = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------- 8
Outcome compound_consistency() {
  double rate = 0, held_out = 0;
  for (int s = 1; s <= kSeeds; ++s) {
    ExperimentConfig cfg;
    cfg.noise_ratio = 0.0;
    cfg.synthetic.compound_fraction = 0.3;
    cfg.apply_seed(static_cast<std::uint64_t>(s));
    const auto vocab = load_vocabulary(cfg);
    const auto data = prepare_data(cfg, vocab);
    const auto ae = train_autoencoder(data.train, vocab, cfg.semantic).model;
    const auto r = train(data.train, &data.test, vocab, ae, cfg.engine);
    auto top2 = [](const VectorXd& l) {
      Index first = 0, second = 0;
      l.maxCoeff(&first);
      VectorXd rest = l;
      rest[first] = -1;
      rest.maxCoeff(&second);
      return std::set<int>{static_cast<int>(first) + 1, static_cast<int>(second) + 1};
    };
    long hit = 0, n = 0;
    for (std::size_t i = 0; i < data.train.size(); ++i) {
      const int b = (*data.train.mix_partner)[i];
      if (!b) continue;
      hit += top2(r.distributions[i]) == std::set<int>{data.train.samples[i].label, b};
      ++n;
    }
    rate += static_cast<double>(hit) / static_cast<double>(n) / kSeeds;
    long hit_t = 0, n_t = 0;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      const int b = (*data.test.mix_partner)[i];
      if (!b) continue;
      const auto p = predict_with_distribution(r.pipeline, data.test.samples[i].x, data.test.samples[i].label);
      hit_t += top2(p.distribution) == std::set<int>{data.test.samples[i].label, b};
      ++n_t;
    }
    held_out += static_cast<double>(hit_t) / static_cast<double>(n_t) / kSeeds;
  }
  return {rate >= 0.8, "top-2 match " + fmt("%.3f", rate) + " on training compounds (held-out " + fmt("%.3f", held_out) + ")"};
}

// ---------------------------------------------------------------- 9, 10
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("ldamend-accept-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome semantic_analysis() {
  TempDir t;
  CommandOptions o;
  o.out_dir = t.path;
  std::ostringstream log;
  cmd_embed_analyze(o, log);
  std::istringstream in(slurp(t.path / "similarity.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> words;
  {
    std::istringstream h(line);
    std::string cell;
    std::getline(h, cell, ',');
    while (std::getline(h, cell, ',')) words.push_back(cell);
  }
  const Index c = static_cast<Index>(words.size());
  MatrixXd m(c, c);
  for (Index r = 0; r < c; ++r) {
    std::getline(in, line);
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    for (Index k = 0; k < c; ++k) {
      std::getline(cells, cell, ',');
      m(r, k) = parse_double(cell);
    }
  }
  auto at = [&](const char* a, const char* b) {
    return m(std::find(words.begin(), words.end(), a) - words.begin(), std::find(words.begin(), words.end(), b) - words.begin());
  };
  const bool sym = m == m.transpose();
  const bool diag = (m.diagonal().array() - 1).abs().maxCoeff() < 1e-12;
  const double sh = at("surprised", "happy"), sn = at("surprised", "neutral");
  const double da = at("disgusted", "angry"), dh = at("disgusted", "happy");
  return {sym && diag && sh > sn && da > dh,
          std::string(sym ? "symmetric" : "ASYMMETRIC") + ", " + (diag ? "unit diagonal" : "BAD DIAGONAL") +
              ", sim(su,ha) " + fmt("%.3f", sh) + " > sim(su,ne) " + fmt("%.3f", sn) + ", sim(di,an) " + fmt("%.3f", da) +
              " > sim(di,ha) " + fmt("%.3f", dh)};
}

Outcome determinism() {
  TempDir t;
  std::ostringstream log;
  std::vector<std::string> mismatched;
  auto run_all = [&](const fs::path& dir) {
    CommandOptions o;
    o.seed = 5;
    o.out_dir = dir / "data";
    cmd_gen_data(o, log);
    o.out_dir = dir / "sim";
    cmd_embed_analyze(o, log);
    o.out_dir = dir / "train";
    cmd_train(o, log);
    CommandOptions e;
    e.checkpoint = dir / "train" / "checkpoint.bin";
    e.data = dir / "data" / "test.csv";
    e.out_dir = dir / "eval";
    std::ostringstream sink;
    cmd_evaluate(e, sink, log);
    e.out_dir = dir / "amend";
    cmd_amend(e, sink, log);
  };
  run_all(t.path / "a");
  run_all(t.path / "b");
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(t.path / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), t.path / "a");
    ++files;
    if (slurp(entry.path()) != slurp(t.path / "b" / rel)) mismatched.push_back(rel.string());
  }

  // checkpoint reload against the in-memory pipeline
  ExperimentConfig cfg;
  cfg.apply_seed(5);
  const auto vocab = load_vocabulary(cfg);
  const auto data = prepare_data(cfg, vocab);
  const auto ae = train_autoencoder(data.train, vocab, cfg.semantic).model;
  const auto r = train(data.train, &data.test, vocab, ae, cfg.engine);
  const auto loaded = load_checkpoint(t.path / "a" / "train" / "checkpoint.bin");
  const MatrixXd x = data.test.feature_matrix();
  const bool logits_equal = r.pipeline.model.logits(x) == loaded.model.logits(x);
  const bool acc_equal = evaluate(r.pipeline.model, data.test) == evaluate(loaded.model, data.test);
  bool predictions_equal = true;
  for (std::size_t i = 0; i < data.test.size(); i += 11) {
    const auto p = predict_with_distribution(r.pipeline, data.test.samples[i].x, data.test.samples[i].label);
    const auto q = predict_with_distribution(loaded, data.test.samples[i].x, data.test.samples[i].label);
    predictions_equal = predictions_equal && p.distribution == q.distribution && p.alpha == q.alpha;
  }
  std::string detail = std::to_string(files) + " output files compared, " + std::to_string(mismatched.size()) + " differ";
  for (const auto& m : mismatched) detail += " [" + m + "]";
  detail += std::string(", reload ") + (logits_equal && acc_equal && predictions_equal ? "bitwise identical" : "DIFFERS");
  return {mismatched.empty() && files > 0 && logits_equal && acc_equal && predictions_equal, detail};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << std::endl;
  };

  report(1, "gradient correctness", gradients);
  report(2, "optimal transport exactness", transport_exactness);
  report(3, "simplex and graph invariants", invariants);
  report(4, "baseline equivalence", baseline_equivalence);

  NoiseRun n20;
  bool n20_ok = true;
  std::string n20_err;
  try {
    n20 = noise_runs(0.2, 0.7);
  } catch (const std::exception& e) {
    n20_ok = false;
    n20_err = e.what();
  }
  report(5, "noise robustness at 20% (beta 0.7 vs 1.0)", [&]() -> Outcome {
    if (!n20_ok) return {false, "exception: " + n20_err};
    const double gap = 100 * (n20.acc_a - n20.acc_b);
    return {gap >= 3.0 && n20.secs < 180, "acc " + fmt("%.4f", n20.acc_a) + " vs " + fmt("%.4f", n20.acc_b) + ", gap " +
                                              fmt("%.2f", gap) + " points, " + fmt("%.1f s", n20.secs)};
  });
  report(6, "confidence separation of flipped labels", [&]() -> Outcome {
    if (!n20_ok) return {false, "exception: " + n20_err};
    return {n20.auc > 0.75, "mean ROC-AUC " + fmt("%.4f", n20.auc)};
  });
  report(7, "beta sweep at 30% noise (beta 0.3 vs 1.0)", [&]() -> Outcome {
    const auto n30 = noise_runs(0.3, 0.3);
    const double gap = 100 * (n30.acc_a - n30.acc_b);
    return {gap >= 3.0, "acc " + fmt("%.4f", n30.acc_a) + " vs " + fmt("%.4f", n30.acc_b) + ", gap " + fmt("%.2f", gap) + " points"};
  });
  report(8, "compound distribution consistency", compound_consistency);
  report(9, "semantic analysis of the fixture", semantic_analysis);
  report(10, "determinism and persistence", determinism);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
