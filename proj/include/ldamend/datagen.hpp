#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>

#include "ldamend/dataset.hpp"
#include "ldamend/embeddings.hpp"

namespace ldamend {

struct SyntheticSpec {
  int num_classes = 7;
  Index dim = 16;
  int samples_per_class = 300;
  double cluster_spread = 0.2;
  double compound_fraction = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Class means (d_in x c): classical MDS of the chordal distances
// sqrt(2 (1 - cos)) between normalized word vectors, rescaled to unit mean
// pairwise distance. Inter-mean distances are monotone in 1 - cos.
MatrixXd class_means(const SyntheticSpec& spec, const EmotionVocabulary& vocab);

// Pure samples are mean + N(0, spread^2 I). Compound samples are
// lambda mu_a + (1 - lambda) mu_b with lambda ~ U(0.5, 0.9), labeled a.
Dataset generate_synthetic(const SyntheticSpec& spec, const EmotionVocabulary& vocab);

// Flips exactly round(ratio n) labels, chosen without replacement, each to a
// uniformly drawn different class. Sets flip_mask and true_labels.
Dataset inject_noise(const Dataset& data, double ratio, int num_classes, std::uint64_t seed);

// Stratified by label; both halves keep the input order.
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

void write_csv(const Dataset& data, std::ostream& out);
Dataset read_csv(std::istream& in, int num_classes);
void save_csv(const Dataset& data, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path, int num_classes);

}  // namespace ldamend
