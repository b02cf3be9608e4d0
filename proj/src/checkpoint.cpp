#include "boostedseq/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace boostedseq {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'E', 'Q', 'E', 'N', 'S', '\n'};
constexpr std::uint64_t kMaxString = 1ULL << 32;

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > kMaxString) throw CheckpointError("checkpoint string length out of range");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw CheckpointError("checkpoint truncated");
  }
  return s;
}

void put_strings(std::ostream& out, const std::vector<std::string>& v) {
  put<std::uint64_t>(out, v.size());
  for (const auto& s : v) put_string(out, s);
}

std::vector<std::string> get_strings(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  std::vector<std::string> v;
  for (std::uint64_t i = 0; i < n; ++i) v.push_back(get_string(in));
  return v;
}

}  // namespace

void write_model(std::ostream& out, const ClassifierModel& model) {
  const auto& c = model.config;
  for (std::size_t v : {c.vocab_size, c.num_classes, c.word_dim, c.pos_dim, c.position_rows,
                        c.hidden, c.layers}) {
    put<std::uint64_t>(out, v);
  }
  put<double>(out, c.dropout);
  std::uint64_t blocks = 0;
  model.params.for_each([&blocks](const std::string&, const Matrix&, ParamKind) { ++blocks; });
  put<std::uint64_t>(out, blocks);
  model.params.for_each([&out](const std::string& name, const Matrix& m, ParamKind) {
    put_string(out, name);
    put<std::uint64_t>(out, m.rows());
    put<std::uint64_t>(out, m.cols());
    for (double v : m.flat()) put<double>(out, v);
  });
}

ClassifierModel read_model(std::istream& in) {
  ModelConfig c;
  std::size_t* fields[] = {&c.vocab_size, &c.num_classes, &c.word_dim, &c.pos_dim,
                           &c.position_rows, &c.hidden, &c.layers};
  for (auto* f : fields) *f = static_cast<std::size_t>(get<std::uint64_t>(in));
  c.dropout = get<double>(in);
  if (c.layers == 0 || c.layers > 64 || c.hidden == 0 || c.num_classes < 2) {
    throw CheckpointError("checkpoint model config is invalid");
  }

  // Build the expected layout, then fill it tensor by tensor.
  ClassifierModel m;
  m.config = c;
  auto& p = m.params;
  p.embeddings.word = Matrix(c.vocab_size, c.word_dim);
  p.embeddings.pos1 = Matrix(c.position_rows, c.pos_dim);
  p.embeddings.pos2 = Matrix(c.position_rows, c.pos_dim);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t in_dim = l == 0 ? c.input_dim() : 2 * c.hidden;
    for (auto* dir : {&p.forward, &p.backward}) {
      dir->push_back({Matrix(4 * c.hidden, in_dim + c.hidden), Matrix(4 * c.hidden, 1)});
    }
  }
  p.attention = {Matrix(1, 2 * c.hidden), Matrix(1, 1)};
  p.output_weight = Matrix(c.num_classes, 2 * c.hidden);
  p.output_bias = Matrix(c.num_classes, 1);

  std::uint64_t expected = 0;
  p.for_each([&expected](const std::string&, const Matrix&, ParamKind) { ++expected; });
  if (get<std::uint64_t>(in) != expected) throw CheckpointError("checkpoint tensor count mismatch");
  p.for_each([&in](const std::string& name, Matrix& t, ParamKind) {
    const std::string got = get_string(in);
    if (got != name) throw CheckpointError("checkpoint tensor '" + got + "', expected '" + name + "'");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows != t.rows() || cols != t.cols()) {
      throw CheckpointError("checkpoint tensor '" + name + "' has shape (" +
                            std::to_string(rows) + "x" + std::to_string(cols) + "), expected " +
                            t.shape_string());
    }
    for (double& v : t.flat()) v = get<double>(in);
  });
  return m;
}

void write_checkpoint(const EnsembleCheckpoint& ckpt, const std::filesystem::path& path) {
  if (ckpt.ensemble.models.size() != ckpt.ensemble.clf_weights.size()) {
    throw CheckpointError("ensemble models and weights disagree in length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, ckpt.config_echo);
  put<std::uint64_t>(out, ckpt.seed);
  put_strings(out, ckpt.relation_names);
  put_strings(out, ckpt.vocab.regular_tokens());
  put<std::uint64_t>(out, ckpt.encoding.max_len);
  put<std::int64_t>(out, ckpt.encoding.max_dist);
  put<std::uint64_t>(out, ckpt.ensemble.size());
  for (std::size_t t = 0; t < ckpt.ensemble.size(); ++t) {
    put<double>(out, ckpt.ensemble.clf_weights[t]);
    write_model(out, ckpt.ensemble.models[t]);
  }
  put<std::uint64_t>(out, ckpt.history.size());
  for (const auto& r : ckpt.history) {
    put<std::uint64_t>(out, r.round);
    put<double>(out, r.error);
    put<double>(out, r.clf_weight);
    put<std::uint64_t>(out, r.selected_epoch);
    put<std::uint64_t>(out, r.batch_weights.size());
    for (double d : r.batch_weights) put<double>(out, d);
  }
  if (!out) throw CheckpointError("error writing " + path.string());
}

EnsembleCheckpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + " is not a boostedseq checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  EnsembleCheckpoint c;
  c.config_echo = get_string(in);
  c.seed = get<std::uint64_t>(in);
  c.relation_names = get_strings(in);
  c.vocab = Vocabulary::from_tokens(get_strings(in));
  c.encoding.max_len = static_cast<std::size_t>(get<std::uint64_t>(in));
  c.encoding.max_dist = static_cast<int>(get<std::int64_t>(in));
  const auto members = get<std::uint64_t>(in);
  for (std::uint64_t t = 0; t < members; ++t) {
    c.ensemble.clf_weights.push_back(get<double>(in));
    c.ensemble.models.push_back(read_model(in));
    const auto& mc = c.ensemble.models.back().config;
    if (mc.vocab_size != c.vocab.size() || mc.num_classes != c.relation_names.size()) {
      throw CheckpointError("checkpoint member " + std::to_string(t) +
                            " disagrees with the stored vocabulary or relation set");
    }
  }
  const auto rounds = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < rounds; ++i) {
    RoundRecord r;
    r.round = static_cast<std::size_t>(get<std::uint64_t>(in));
    r.error = get<double>(in);
    r.clf_weight = get<double>(in);
    r.selected_epoch = static_cast<std::size_t>(get<std::uint64_t>(in));
    const auto n = get<std::uint64_t>(in);
    for (std::uint64_t j = 0; j < n; ++j) r.batch_weights.push_back(get<double>(in));
    c.history.push_back(std::move(r));
  }
  return c;
}

}  // namespace boostedseq
