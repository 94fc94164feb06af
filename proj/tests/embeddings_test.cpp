#include <doctest.h>

#include <random>
#include <sstream>

#include "ldamend/embeddings.hpp"
#include "ldamend/errors.hpp"
#include "ldamend/semantic.hpp"

using namespace ldamend;

namespace {

EmotionVocabulary fixture_vocab() { return load_word2vec_text(default_fixture_path(), default_emotion_words()); }

std::string error_text(const std::string& file, const std::vector<std::string>& words) {
  std::istringstream in(file);
  try {
    parse_word2vec_text(in, words);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("fixture loads in label order") {
  const auto v = fixture_vocab();
  CHECK(v.size() == 7);
  CHECK(v.dim() == 16);
  CHECK(v.words == default_emotion_words());
  CHECK(v.label_of("happy") == 4);
  CHECK(v.label_of("Neutral") == 7);
  CHECK_THROWS_AS(v.label_of("bored"), MissingWordError);
  CHECK(word_vector(v, 1) == v.vectors.row(0).transpose());
  CHECK_THROWS_AS(word_vector(v, 8), RangeError);
}

TEST_CASE("similarity matrix of the fixture") {
  const auto s = similarity_matrix(fixture_vocab());
  const MatrixXd& m = s.values;
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((m.array().abs() <= 1.0).all());
  auto at = [&](const char* a, const char* b) {
    const auto ia = std::find(s.words.begin(), s.words.end(), a) - s.words.begin();
    const auto ib = std::find(s.words.begin(), s.words.end(), b) - s.words.begin();
    return m(ia, ib);
  };
  CHECK(at("surprised", "happy") > at("surprised", "neutral"));
  CHECK(at("disgusted", "angry") > at("disgusted", "happy"));
}

TEST_CASE("word matching is case-insensitive and keeps the requested order") {
  const std::string file = "3 2\nHappy 1 0\nsad 0 1\nANGRY 1 1\n";
  std::istringstream in(file);
  const auto v = parse_word2vec_text(in, {"angry", "HAPPY"});
  CHECK(v.words == std::vector<std::string>{"angry", "happy"});
  CHECK(v.vectors(0, 1) == 1.0);
  CHECK(v.vectors(1, 1) == 0.0);
}

TEST_CASE("malformed embedding files are rejected with line numbers") {
  const std::vector<std::string> w{"a", "b"};
  CHECK(error_text("", w).find("empty") != std::string::npos);
  CHECK(error_text("2\na 1\nb 2\n", w).find("line 1") != std::string::npos);
  CHECK(error_text("2 2\na 1 0\nb 1\n", w).find("line 3") != std::string::npos);
  CHECK(error_text("2 2\na 1 x\nb 1 1\n", w).find("line 2") != std::string::npos);
  CHECK(error_text("2 2\na 1 0\na 0 1\n", w).find("duplicate") != std::string::npos);
  CHECK(error_text("3 2\na 1 0\nb 0 1\n", w).find("announces 3") != std::string::npos);
  CHECK(error_text("2 2\na 1 0\nb 0 0\n", w).find("zero norm") != std::string::npos);

  std::istringstream missing("2 2\na 1 0\nc 0 1\n");
  try {
    parse_word2vec_text(missing, w);
    FAIL("expected MissingWordError");
  } catch (const MissingWordError& e) {
    CHECK(e.word() == "b");
  }
  CHECK_THROWS_AS(load_word2vec_text("/nonexistent/file.vec", w), ConfigError);
}

TEST_CASE("save and load round trip exactly") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0, 1);
  EmotionVocabulary v;
  v.words = {"x", "y", "z"};
  v.vectors.resize(3, 5);
  for (Index i = 0; i < v.vectors.size(); ++i) v.vectors.data()[i] = g(rng) * 1e3;
  std::ostringstream out;
  write_word2vec_text(v, out);
  std::istringstream in(out.str());
  const auto back = parse_word2vec_text(in, v.words);
  CHECK(back.vectors == v.vectors);
}

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK_THROWS_AS(parse_double("1.5abc"), ParseError);
  CHECK_THROWS_AS(parse_double(""), ParseError);
}

TEST_CASE("semantic_crgraph examples") {
  EmotionVocabulary ortho;
  ortho.words = {"a", "b", "c"};
  ortho.vectors = MatrixXd::Identity(3, 4);
  const auto one = semantic_crgraph(ortho, VectorXd::Unit(4, 1));
  CHECK(one[1] == 1.0);
  CHECK(one[0] == 0.0);
  CHECK(one[2] == 0.0);
  CHECK(semantic_crgraph(ortho, VectorXd::Unit(4, 3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(semantic_crgraph(ortho, VectorXd::Zero(4)), NumericError);

  const auto fx = fixture_vocab();
  const auto s = semantic_crgraph(fx, fx.vectors.row(0).transpose());
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[3] > s[6]);
}

TEST_CASE("semantic_crgraph is scale invariant and bounded") {
  const auto fx = fixture_vocab();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int t = 0; t < 200; ++t) {
    VectorXd v(16);
    for (Index k = 0; k < 16; ++k) v[k] = g(rng);
    const auto a = semantic_crgraph(fx, v);
    const auto b = semantic_crgraph(fx, scale(rng) * v);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.array().abs() <= 1.0).all());
  }
}
