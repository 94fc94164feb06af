#include "ldamend/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ldamend/errors.hpp"
#include "ldamend/nn/loss.hpp"

namespace ldamend {

void Dataset::validate(int num_classes) const {
  const Index d = dim();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.x.size() != d)
      throw DimensionError("sample " + s.id + " has " + std::to_string(s.x.size()) + " features, expected " +
                           std::to_string(d));
    if (s.label < 1 || s.label > num_classes)
      throw RangeError("sample " + s.id + " has label " + std::to_string(s.label) + " outside 1.." +
                       std::to_string(num_classes));
    if (!s.x.allFinite()) throw NumericError("sample " + s.id + " has non-finite features");
  }
  if (flip_mask && flip_mask->size() != samples.size()) throw DimensionError("flip mask length mismatch");
  if (true_labels) {
    if (true_labels->size() != samples.size()) throw DimensionError("true label count mismatch");
    for (int t : *true_labels)
      if (t < 1 || t > num_classes) throw RangeError("true label " + std::to_string(t) + " out of range");
  }
  if (mix_partner && mix_partner->size() != samples.size()) throw DimensionError("mix partner count mismatch");
}

MatrixXd Dataset::feature_matrix() const {
  MatrixXd x(dim(), static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) x.col(static_cast<Index>(i)) = samples[i].x;
  return x;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return y;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  if (flip_mask) out.flip_mask.emplace();
  if (true_labels) out.true_labels.emplace();
  if (mix_partner) out.mix_partner.emplace();
  for (std::size_t i : indices) {
    out.samples.push_back(samples.at(i));
    if (flip_mask) out.flip_mask->push_back((*flip_mask)[i]);
    if (true_labels) out.true_labels->push_back((*true_labels)[i]);
    if (mix_partner) out.mix_partner->push_back((*mix_partner)[i]);
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic data needs at least two classes");
  if (dim < 1) throw ConfigError("synthetic dimension must be positive");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be positive");
  if (!(cluster_spread >= 0) || !std::isfinite(cluster_spread)) throw ConfigError("cluster_spread must be nonnegative");
  if (!(compound_fraction >= 0 && compound_fraction <= 1)) throw ConfigError("compound_fraction must lie in [0, 1]");
}

MatrixXd class_means(const SyntheticSpec& spec, const EmotionVocabulary& vocab) {
  spec.validate();
  vocab.validate();
  if (vocab.size() != spec.num_classes)
    throw ConfigError("synthetic spec has " + std::to_string(spec.num_classes) + " classes, vocabulary has " +
                      std::to_string(vocab.size()));
  const Index c = vocab.size();
  const MatrixXd sim = similarity_matrix(vocab).values;
  MatrixXd d2 = (2.0 * (1.0 - sim.array())).max(0.0).matrix();
  d2.diagonal().setZero();

  const MatrixXd centering = MatrixXd::Identity(c, c) - MatrixXd::Constant(c, c, 1.0 / static_cast<double>(c));
  const MatrixXd gram = -0.5 * centering * d2 * centering;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericError("class-mean placement failed to converge");

  // Eigenvalues ascend; take the largest ones first.
  MatrixXd means = MatrixXd::Zero(spec.dim, c);
  Index axis = 0;
  for (Index e = c - 1; e >= 0 && axis < spec.dim; --e) {
    const double lambda = eig.eigenvalues()[e];
    if (lambda <= 1e-12) break;
    means.row(axis++) = std::sqrt(lambda) * eig.eigenvectors().col(e).transpose();
  }

  double total = 0;
  int pairs = 0;
  for (Index j = 0; j < c; ++j)
    for (Index k = j + 1; k < c; ++k, ++pairs) total += (means.col(j) - means.col(k)).norm();
  const double mean_dist = total / pairs;
  if (!(mean_dist > 0)) throw NumericError("vocabulary vectors are all parallel; classes cannot be separated");
  return means / mean_dist;
}

Dataset generate_synthetic(const SyntheticSpec& spec, const EmotionVocabulary& vocab) {
  const MatrixXd means = class_means(spec, vocab);
  Rng rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> mix(0.5, 0.9);
  std::uniform_int_distribution<int> other(1, spec.num_classes - 1);

  const int n_compound = static_cast<int>(std::lround(spec.compound_fraction * spec.samples_per_class));
  Dataset data;
  data.mix_partner.emplace();
  for (int k = 1; k <= spec.num_classes; ++k) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Sample s;
      s.label = k;
      char id[48];
      if (i < spec.samples_per_class - n_compound) {
        s.x = means.col(k - 1);
        for (Index j = 0; j < spec.dim; ++j) s.x[j] += spec.cluster_spread * noise(rng);
        std::snprintf(id, sizeof(id), "c%d-%04d", k, i);
        data.mix_partner->push_back(0);
      } else {
        int b = other(rng);
        if (b >= k) ++b;
        const double lambda = mix(rng);
        s.x = lambda * means.col(k - 1) + (1.0 - lambda) * means.col(b - 1);
        std::snprintf(id, sizeof(id), "c%d-%04d-m%d", k, i, b);
        data.mix_partner->push_back(b);
      }
      s.id = id;
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

Dataset inject_noise(const Dataset& data, double ratio, int num_classes, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw RangeError("noise ratio must lie in [0, 1]");
  if (num_classes < 2) throw RangeError("label noise needs at least two classes");
  data.validate(num_classes);
  Dataset out = data;
  const std::size_t n = data.size();
  if (!out.true_labels) out.true_labels = data.labels();
  if (!out.flip_mask) out.flip_mask = std::vector<bool>(n, false);

  const auto flips = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> other(1, num_classes - 1);
  for (std::size_t f = 0; f < flips; ++f) {
    auto& s = out.samples[order[f]];
    int y = other(rng);
    if (y >= s.label) ++y;
    s.label = y;
    (*out.flip_mask)[order[f]] = true;
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw RangeError("test fraction must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.samples[i].label].push_back(i);

  Rng rng(seed);
  std::vector<bool> is_test(data.size(), false);
  for (auto& [label, members] : by_class) {
    if (members.size() < 2) throw RangeError("class " + std::to_string(label) + " has fewer than two samples");
    std::shuffle(members.begin(), members.end(), rng);
    const long n = static_cast<long>(members.size());
    const long n_test = std::clamp(std::lround(test_fraction * static_cast<double>(n)), 1L, n - 1);
    for (long t = 0; t < n_test; ++t) is_test[members[static_cast<std::size_t>(t)]] = true;
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < data.size(); ++i) (is_test[i] ? test_idx : train_idx).push_back(i);
  return {data.subset(train_idx), data.subset(test_idx)};
}

void write_csv(const Dataset& data, std::ostream& out) {
  const bool with_flip = data.flip_mask.has_value();
  const bool with_true = data.true_labels.has_value();
  out << "id,label";
  if (with_flip) out << ",flipped";
  if (with_true) out << ",true_label";
  for (Index j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    out << s.id << ',' << s.label;
    if (with_flip) out << ',' << ((*data.flip_mask)[i] ? 1 : 0);
    if (with_true) out << ',' << (*data.true_labels)[i];
    for (Index j = 0; j < s.x.size(); ++j) out << ',' << format_double(s.x[j]);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_int(const std::string& s, long line_no) {
  try {
    const double v = parse_double(s);
    if (v != std::floor(v)) throw ParseError("not an integer");
    return static_cast<int>(v);
  } catch (const ParseError&) {
    throw ParseError("line " + std::to_string(line_no) + ": expected an integer, got '" + s + "'");
  }
}

}  // namespace

Dataset read_csv(std::istream& in, int num_classes) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("line 1: missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "id" || header[1] != "label")
    throw ParseError("line 1: header must start with 'id,label'");
  std::size_t col = 2;
  const bool with_flip = col < header.size() && header[col] == "flipped";
  if (with_flip) ++col;
  const bool with_true = col < header.size() && header[col] == "true_label";
  if (with_true) ++col;
  const std::size_t first_feature = col;
  for (std::size_t j = first_feature; j < header.size(); ++j)
    if (header[j] != "f" + std::to_string(j - first_feature))
      throw ParseError("line 1: unexpected column '" + header[j] + "'");
  const Index dim = static_cast<Index>(header.size() - first_feature);

  Dataset data;
  if (with_flip) data.flip_mask.emplace();
  if (with_true) data.true_labels.emplace();
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " columns, found " + std::to_string(cells.size()));
    Sample s;
    s.id = cells[0];
    s.label = parse_int(cells[1], line_no);
    if (s.label < 1 || s.label > num_classes)
      throw RangeError("line " + std::to_string(line_no) + ": label " + std::to_string(s.label) + " outside 1.." +
                       std::to_string(num_classes));
    if (with_flip) {
      const int f = parse_int(cells[2], line_no);
      if (f != 0 && f != 1) throw ParseError("line " + std::to_string(line_no) + ": flipped must be 0 or 1");
      data.flip_mask->push_back(f == 1);
    }
    if (with_true) {
      const int t = parse_int(cells[with_flip ? 3 : 2], line_no);
      if (t < 1 || t > num_classes)
        throw RangeError("line " + std::to_string(line_no) + ": true label " + std::to_string(t) + " out of range");
      data.true_labels->push_back(t);
    }
    s.x.resize(dim);
    for (Index j = 0; j < dim; ++j) {
      try {
        s.x[j] = parse_double(cells[first_feature + static_cast<std::size_t>(j)]);
      } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    data.samples.push_back(std::move(s));
  }
  data.validate(num_classes);
  return data;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write dataset: " + path.string());
  write_csv(data, out);
  if (!out) throw Error("failed writing dataset: " + path.string());
}

Dataset load_csv(const std::filesystem::path& path, int num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset: " + path.string());
  return read_csv(in, num_classes);
}

}  // namespace ldamend
