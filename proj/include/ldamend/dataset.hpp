#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ldamend/types.hpp"

namespace ldamend {

struct Sample {
  std::string id;
  VectorXd x;
  int label = 1;  // 1..c
};

struct Dataset {
  std::vector<Sample> samples;
  std::optional<std::vector<bool>> flip_mask;
  std::optional<std::vector<int>> true_labels;
  // Second generating class of a compound sample, 0 for pure samples. Kept in
  // memory only; the CSV schema does not carry it.
  std::optional<std::vector<int>> mix_partner;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  Index dim() const { return samples.empty() ? 0 : samples.front().x.size(); }

  // Throws on inconsistent widths, labels outside 1..num_classes, or side
  // vectors whose length differs from the sample count.
  void validate(int num_classes) const;

  MatrixXd feature_matrix() const;  // d_in x n, one column per sample
  std::vector<int> labels() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

}  // namespace ldamend
