#include "boostedseq/embeddings.hpp"

#include <fstream>
#include <sstream>

namespace boostedseq {

EmbeddingTables make_embedding_tables(std::size_t vocab_size, std::size_t word_dim,
                                      std::size_t position_rows, std::size_t pos_dim,
                                      double word_scale, double pos_scale, Rng& rng) {
  EmbeddingTables t;
  t.word = gaussian_init(vocab_size, word_dim, word_scale, rng);
  for (double& v : t.word.row(Vocabulary::kPad)) v = 0.0;
  t.pos1 = gaussian_init(position_rows, pos_dim, pos_scale, rng);
  t.pos2 = gaussian_init(position_rows, pos_dim, pos_scale, rng);
  return t;
}

Matrix load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                         std::size_t word_dim, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vectors " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty vector file");
  std::size_t count = 0, dim = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> count >> dim)) throw DataError(path.string() + ":1: expected header 'V d'");
  }
  if (dim != word_dim) {
    throw DataError(path.string() + ": vector dimension " + std::to_string(dim) +
                    " does not match configured word dimension " + std::to_string(word_dim));
  }

  Matrix table = gaussian_init(vocab.size(), word_dim, kMissingWordScale, rng);
  for (double& v : table.row(Vocabulary::kPad)) v = 0.0;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    Vector values;
    double v;
    while (ls >> v) values.push_back(v);
    if (values.size() != dim) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(dim) + " values, got " + std::to_string(values.size()));
    }
    if (!vocab.contains(token)) continue;
    const int idx = vocab.index(token);
    if (idx == Vocabulary::kPad) continue;
    auto row = table.row(static_cast<std::size_t>(idx));
    std::copy(values.begin(), values.end(), row.begin());
  }
  return table;
}

namespace {

void check_index(int idx, std::size_t rows, const char* table) {
  if (idx < 0 || static_cast<std::size_t>(idx) >= rows) {
    throw std::out_of_range(std::string(table) + " index " + std::to_string(idx) +
                            " outside [0, " + std::to_string(rows) + ")");
  }
}

}  // namespace

std::vector<Vector> embed_sentence(const EncodedSentence& row, const EmbeddingTables& tables) {
  const std::size_t dw = tables.word_dim();
  const std::size_t dp = tables.pos_dim();
  std::vector<Vector> xs;
  xs.reserve(row.length);
  for (std::size_t t = 0; t < row.length; ++t) {
    check_index(row.words[t], tables.word.rows(), "word");
    check_index(row.pos1[t], tables.pos1.rows(), "position-1");
    check_index(row.pos2[t], tables.pos2.rows(), "position-2");
    Vector x(dw + 2 * dp);
    auto w = tables.word.row(static_cast<std::size_t>(row.words[t]));
    auto p1 = tables.pos1.row(static_cast<std::size_t>(row.pos1[t]));
    auto p2 = tables.pos2.row(static_cast<std::size_t>(row.pos2[t]));
    std::copy(w.begin(), w.end(), x.begin());
    std::copy(p1.begin(), p1.end(), x.begin() + static_cast<std::ptrdiff_t>(dw));
    std::copy(p2.begin(), p2.end(), x.begin() + static_cast<std::ptrdiff_t>(dw + dp));
    xs.push_back(std::move(x));
  }
  return xs;
}

void accumulate_embedding_gradients(const EncodedSentence& row,
                                    std::span<const Vector> token_grads,
                                    EmbeddingTables& grads) {
  const std::size_t dw = grads.word_dim();
  const std::size_t dp = grads.pos_dim();
  require_size(token_grads.size(), row.length, "embedding gradients");
  for (std::size_t t = 0; t < row.length; ++t) {
    const Vector& g = token_grads[t];
    require_size(g.size(), dw + 2 * dp, "embedding gradient width");
    std::span<const double> gs(g);
    if (row.words[t] != Vocabulary::kPad) {
      axpy(1.0, gs.subspan(0, dw), grads.word.row(static_cast<std::size_t>(row.words[t])));
    }
    axpy(1.0, gs.subspan(dw, dp), grads.pos1.row(static_cast<std::size_t>(row.pos1[t])));
    axpy(1.0, gs.subspan(dw + dp, dp), grads.pos2.row(static_cast<std::size_t>(row.pos2[t])));
  }
}

}  // namespace boostedseq
