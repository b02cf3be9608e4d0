#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "boostedseq/numerics.hpp"

namespace boostedseq {

inline constexpr int kNaRelation = 0;

// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t width() const { return end - begin; }
  bool contains(std::size_t k) const { return k >= begin && k < end; }
  bool operator==(const Span&) const = default;
};

struct Sentence {
  std::string bag_key;
  std::vector<std::string> tokens;
  Span e1;
  Span e2;
  int relation = kNaRelation;

  bool operator==(const Sentence&) const = default;
};

struct Dataset {
  std::vector<std::string> relation_names;
  std::vector<Sentence> sentences;

  std::size_t num_relations() const { return relation_names.size(); }
  std::size_t size() const { return sentences.size(); }
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws DataError describing the first violated sentence invariant.
void validate_sentence(const Sentence& s, std::size_t num_relations);

Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& data, const std::filesystem::path& path);
// Same line format as the file, so tests can round-trip without disk.
std::string format_dataset(const Dataset& data);
Dataset parse_dataset(const std::string& text, const std::string& source = "<memory>");

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  // Keeps tokens occurring at least min_count times, ordered by descending
  // frequency then lexicographically.
  static Vocabulary build(const Dataset& data, std::size_t min_count);
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  void save(const std::filesystem::path& path) const;

  // Unknown tokens map to kUnk.
  int index(const std::string& token) const;
  bool contains(const std::string& token) const { return lookup_.count(token) > 0; }
  const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return tokens_.size(); }
  // Tokens after PAD and UNK, in index order.
  std::vector<std::string> regular_tokens() const;

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> lookup_;
};

struct PositionFeatures {
  std::vector<int> to_e1;
  std::vector<int> to_e2;
};

// Signed distance to the nearest token of an entity span; 0 inside the span.
int signed_distance(std::size_t k, const Span& span);

// Distances clipped to [-max_dist, max_dist] and shifted into [0, 2*max_dist].
PositionFeatures position_features(const Sentence& s, int max_dist);

// Token window kept for a sentence longer than max_len: the head of the
// sentence unless that would cut an entity, in which case a window covering
// both entities.
Span truncation_window(const Sentence& s, std::size_t max_len);

// One sentence in fixed-width encoded form. Entries at or past `length` are padding.
struct EncodedSentence {
  std::vector<int> words;
  std::vector<int> pos1;
  std::vector<int> pos2;
  std::size_t length = 0;
  int label = kNaRelation;
};

struct Batch {
  std::vector<std::size_t> indices;  // positions in the source dataset
  std::vector<EncodedSentence> rows;
  std::size_t max_len = 0;

  std::size_t size() const { return rows.size(); }
  std::vector<int> labels() const;
};

struct EncodingConfig {
  std::size_t max_len = 70;
  int max_dist = 35;

  int position_rows() const { return 2 * max_dist + 1; }
  int pad_position() const { return 2 * max_dist; }
};

EncodedSentence encode_sentence(const Sentence& s, const Vocabulary& vocab,
                                const EncodingConfig& cfg);

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                 const Vocabulary& vocab, const EncodingConfig& cfg);

// Fixed partition of [0, m) into ceil(m/K) groups; optionally shuffled once.
std::vector<std::vector<std::size_t>> partition_indices(std::size_t m, std::size_t batch_size,
                                                        Rng& rng, bool shuffle);

std::vector<Batch> batchify(const Dataset& data, const Vocabulary& vocab,
                            const EncodingConfig& cfg, std::size_t batch_size, Rng& rng,
                            bool shuffle);

// Order-sensitive fingerprint of the batch membership lists.
std::uint64_t partition_fingerprint(const std::vector<Batch>& batches);

struct SynthSpec {
  int num_relations = 6;  // including NA
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  std::size_t vocab_size = 200;  // filler vocabulary
  double trigger_strength = 0.9;
  double label_noise_rate = 0.1;
};

struct SynthCorpus {
  Dataset train;
  Dataset test;
  std::size_t corrupted = 0;  // train labels replaced by a different label
};

SynthCorpus generate_synthetic(const SynthSpec& spec, Rng& rng);

// Token that marks relation r in synthetic corpora (one per non-NA relation).
std::string synthetic_trigger(int relation, int variant);

}  // namespace boostedseq
