#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hiret/tensor.hpp"

namespace hiret {

using Sentence = std::vector<std::string>;

struct CorpusSample {
  std::int64_t id = 0;
  std::vector<Tensor> views;  // b views, each [G, G]
  std::vector<Sentence> sentences;
  std::vector<int> labels;  // active class indices, ascending

  std::size_t token_count() const;
};

struct WorldOptions {
  std::size_t grid = 32;
  std::size_t cells = 4;  // k: the image is a k x k arrangement of patches
  std::size_t views = 2;
  double noise = 0.1;
};

struct DiseaseClass {
  std::string name;  // also the class keyword
  std::size_t row = 0;
  std::size_t col = 0;
  std::vector<Sentence> templates;
  Tensor stamp;  // [6, 6]
};

// Acquisition site. Each site marks its images in a border cell and words its
// sentences with its own frame and preferred templates, so a report's phrasing
// is predictable from the image.
struct Site {
  Sentence prefix;
  Sentence suffix;
  std::size_t marker_row = 0;
  std::size_t marker_col = 0;
};

class SyntheticWorld {
 public:
  static constexpr std::size_t kStamp = 6;
  static constexpr std::size_t kMarker = 4;

  static SyntheticWorld make(std::uint64_t seed, WorldOptions options = {});

  const WorldOptions& options() const noexcept { return options_; }
  const std::vector<DiseaseClass>& classes() const noexcept { return classes_; }
  const std::vector<Site>& sites() const noexcept { return sites_; }
  const std::vector<Sentence>& normal_templates() const noexcept { return normals_; }
  std::size_t num_classes() const noexcept { return classes_.size(); }
  // Class keywords plus anatomical terms eligible for the keyword dictionary.
  const std::vector<std::string>& domain_terms() const noexcept { return domain_terms_; }
  // Tokens that occur in one class's templates and nowhere else in the world.
  std::vector<std::string> class_unique_tokens(std::size_t cls) const;

  std::string to_json() const;

 private:
  WorldOptions options_;
  std::vector<DiseaseClass> classes_;
  std::vector<Site> sites_;
  std::vector<Sentence> normals_;
  std::vector<std::string> domain_terms_;
};

std::vector<CorpusSample> generate_corpus(std::uint64_t seed, std::size_t n, const SyntheticWorld& world);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct CorpusSplit {
  std::vector<CorpusSample> train;
  std::vector<CorpusSample> val;
  std::vector<CorpusSample> test;
};

CorpusSplit split_corpus(const std::vector<CorpusSample>& corpus, std::uint64_t seed, SplitRatios ratios = {});

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnk = 3;
  static constexpr int kSpecials = 4;

  Vocabulary();
  // Full token list, specials first (the vocab.json layout).
  explicit Vocabulary(std::vector<std::string> tokens);

  // Keeps training tokens that occur strictly more than min_count times.
  static Vocabulary build(const std::vector<CorpusSample>& train, int min_count = 3);

  std::size_t size() const noexcept { return tokens_.size(); }
  int id(const std::string& token) const;  // UNK when unknown
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  std::vector<int> encode(const Sentence& sentence) const;
  Sentence decode(const std::vector<int>& ids) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
};

struct KeywordDictionary {
  std::vector<std::string> words;
};

// Top `size` domain terms by training frequency, ties alphabetical. Terms that
// never occur or are outside the vocabulary are skipped.
KeywordDictionary build_keyword_dictionary(const std::vector<CorpusSample>& train, const SyntheticWorld& world,
                                           const Vocabulary& vocab, std::size_t size);

std::string to_lower(std::string s);

// JSON-lines corpus: {"id", "views", "sentences", "labels"} per line.
void write_corpus(const std::filesystem::path& path, const std::vector<CorpusSample>& corpus);
std::vector<CorpusSample> read_corpus(const std::filesystem::path& path, std::size_t grid);

void write_string_array(const std::filesystem::path& path, const std::vector<std::string>& items);
std::vector<std::string> read_string_array(const std::filesystem::path& path);

}  // namespace hiret
