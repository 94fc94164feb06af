#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ldamend/types.hpp"

namespace ldamend {

// Ordered emotion words and their semantic vectors. Row k-1 holds the word
// for numerical label k.
struct EmotionVocabulary {
  std::vector<std::string> words;
  MatrixXd vectors;  // c x d_sem

  Index size() const { return vectors.rows(); }
  Index dim() const { return vectors.cols(); }

  void validate() const;
  int label_of(const std::string& word) const;  // 1-based, throws if absent
};

struct SimilarityMatrix {
  std::vector<std::string> words;
  MatrixXd values;
};

// surprised, fear, disgusted, happy, sad, angry, neutral
std::vector<std::string> default_emotion_words();

std::filesystem::path default_fixture_path();

EmotionVocabulary parse_word2vec_text(std::istream& in, const std::vector<std::string>& required_words);
EmotionVocabulary load_word2vec_text(const std::filesystem::path& path, const std::vector<std::string>& required_words);
void save_word2vec_text(const EmotionVocabulary& vocab, const std::filesystem::path& path);
void write_word2vec_text(const EmotionVocabulary& vocab, std::ostream& out);

SimilarityMatrix similarity_matrix(const EmotionVocabulary& vocab);

// V(y) for a 1-based label.
VectorXd word_vector(const EmotionVocabulary& vocab, int label);

std::string ascii_lower(std::string s);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

}  // namespace ldamend
