#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "boostedseq/corpus.hpp"
#include "boostedseq/numerics.hpp"

namespace boostedseq {

// Word table is stored one row per vocabulary entry (V x word_dim); the two
// position tables have one row per shifted distance index.
struct EmbeddingTables {
  Matrix word;
  Matrix pos1;
  Matrix pos2;

  std::size_t word_dim() const { return word.cols(); }
  std::size_t pos_dim() const { return pos1.cols(); }
  std::size_t input_dim() const { return word.cols() + pos1.cols() + pos2.cols(); }
  std::size_t vocab_size() const { return word.rows(); }
  std::size_t position_rows() const { return pos1.rows(); }

  bool operator==(const EmbeddingTables&) const = default;
};

inline constexpr double kMissingWordScale = 0.01;

EmbeddingTables make_embedding_tables(std::size_t vocab_size, std::size_t word_dim,
                                      std::size_t position_rows, std::size_t pos_dim,
                                      double word_scale, double pos_scale, Rng& rng);

// Reads a text vector file ("V d" header, then "token v1 .. vd"). Rows for
// vocabulary words found in the file are copied; everything else except PAD
// is drawn from N(0, 0.01^2).
Matrix load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                         std::size_t word_dim, Rng& rng);

// x_t = [word, pos-to-e1, pos-to-e2] for each of the first `length` tokens.
std::vector<Vector> embed_sentence(const EncodedSentence& row, const EmbeddingTables& tables);

// Scatter per-token input gradients back into table-shaped accumulators.
// PAD word row stays zero.
void accumulate_embedding_gradients(const EncodedSentence& row,
                                    std::span<const Vector> token_grads,
                                    EmbeddingTables& grads);

}  // namespace boostedseq
