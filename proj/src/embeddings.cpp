#include "ldamend/embeddings.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ldamend/errors.hpp"
#include "ldamend/nn/loss.hpp"

namespace ldamend {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

long parse_count(std::string_view s, const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v <= 0)
    throw ParseError(std::string("embedding header: invalid ") + what + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string ascii_lower(std::string s) {
  for (auto& ch : s)
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("cannot format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError("not a number: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> default_emotion_words() {
  return {"surprised", "fear", "disgusted", "happy", "sad", "angry", "neutral"};
}

std::filesystem::path default_fixture_path() {
  return std::filesystem::path(LDAMEND_FIXTURE_DIR) / "emotions_16d.vec";
}

void EmotionVocabulary::validate() const {
  if (vectors.rows() < 2) throw DimensionError("vocabulary needs at least two words");
  if (static_cast<Index>(words.size()) != vectors.rows())
    throw DimensionError("vocabulary word count does not match vector rows");
  if (vectors.cols() < 1) throw DimensionError("vocabulary vectors are empty");
  std::unordered_set<std::string> seen;
  for (Index k = 0; k < vectors.rows(); ++k) {
    if (!seen.insert(words[k]).second) throw ParseError("duplicate vocabulary word: " + words[k]);
    if (!vectors.row(k).allFinite()) throw NumericError("vector for '" + words[k] + "' is not finite");
    if (!(vectors.row(k).norm() > 0.0)) throw NumericError("vector for '" + words[k] + "' has zero norm");
  }
}

int EmotionVocabulary::label_of(const std::string& word) const {
  const std::string w = ascii_lower(word);
  for (std::size_t k = 0; k < words.size(); ++k)
    if (words[k] == w) return static_cast<int>(k) + 1;
  throw MissingWordError(w);
}

EmotionVocabulary parse_word2vec_text(std::istream& in, const std::vector<std::string>& required_words) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("embedding file is empty");
  const auto header = split_ws(line);
  if (header.size() != 2) throw ParseError("line 1: expected '<count> <dim>' header");
  const long count = parse_count(header[0], "count");
  const long dim = parse_count(header[1], "dim");

  std::unordered_map<std::string, VectorXd> table;
  long entries = 0;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (static_cast<long>(tokens.size()) != dim + 1)
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) + " values, found " +
                       std::to_string(tokens.size() - 1));
    VectorXd v(dim);
    for (long j = 0; j < dim; ++j) {
      try {
        v[j] = parse_double(tokens[j + 1]);
      } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    std::string word = ascii_lower(std::string(tokens[0]));
    if (!table.emplace(word, std::move(v)).second)
      throw ParseError("line " + std::to_string(line_no) + ": duplicate word '" + word + "'");
    ++entries;
  }
  if (entries != count)
    throw ParseError("header announces " + std::to_string(count) + " words, file has " + std::to_string(entries));

  EmotionVocabulary vocab;
  vocab.vectors.resize(static_cast<Index>(required_words.size()), dim);
  for (std::size_t k = 0; k < required_words.size(); ++k) {
    std::string w = ascii_lower(required_words[k]);
    auto it = table.find(w);
    if (it == table.end()) throw MissingWordError(w);
    vocab.vectors.row(static_cast<Index>(k)) = it->second.transpose();
    vocab.words.push_back(std::move(w));
  }
  vocab.validate();
  return vocab;
}

EmotionVocabulary load_word2vec_text(const std::filesystem::path& path, const std::vector<std::string>& required_words) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding file: " + path.string());
  return parse_word2vec_text(in, required_words);
}

void write_word2vec_text(const EmotionVocabulary& vocab, std::ostream& out) {
  out << vocab.size() << ' ' << vocab.dim() << '\n';
  for (Index k = 0; k < vocab.size(); ++k) {
    out << vocab.words[k];
    for (Index j = 0; j < vocab.dim(); ++j) out << ' ' << format_double(vocab.vectors(k, j));
    out << '\n';
  }
}

void save_word2vec_text(const EmotionVocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write embedding file: " + path.string());
  write_word2vec_text(vocab, out);
}

SimilarityMatrix similarity_matrix(const EmotionVocabulary& vocab) {
  vocab.validate();
  const Index c = vocab.size();
  SimilarityMatrix m{vocab.words, MatrixXd(c, c)};
  for (Index j = 0; j < c; ++j)
    for (Index k = 0; k < c; ++k)
      m.values(j, k) = cosine_similarity(vocab.vectors.row(j).transpose(), vocab.vectors.row(k).transpose());
  return m;
}

VectorXd word_vector(const EmotionVocabulary& vocab, int label) {
  if (label < 1 || label > vocab.size())
    throw RangeError("label " + std::to_string(label) + " outside 1.." + std::to_string(vocab.size()));
  return vocab.vectors.row(label - 1).transpose();
}

}  // namespace ldamend
