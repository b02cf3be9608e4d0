#include "boostedseq/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace boostedseq {

namespace {

constexpr const char* kRelationsHeader = "#relations: ";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::size_t parse_index(const std::string& field, const std::string& where) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(field, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != field.size() || field.empty() || field[0] == '-') {
    throw DataError(where + ": expected a non-negative integer, got '" + field + "'");
  }
  return static_cast<std::size_t>(v);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void validate_sentence(const Sentence& s, std::size_t num_relations) {
  const std::size_t n = s.tokens.size();
  if (n == 0) throw DataError("sentence has no tokens");
  for (const Span* span : {&s.e1, &s.e2}) {
    const char* name = span == &s.e1 ? "e1" : "e2";
    if (span->begin >= span->end) throw DataError(std::string(name) + " span is empty");
    if (span->end > n) {
      throw DataError(std::string(name) + " span end " + std::to_string(span->end) +
                      " exceeds token count " + std::to_string(n));
    }
  }
  if (s.relation < 0 || static_cast<std::size_t>(s.relation) >= num_relations) {
    throw DataError("relation index " + std::to_string(s.relation) + " out of range");
  }
}

Dataset parse_dataset(const std::string& text, const std::string& source) {
  Dataset data;
  std::map<std::string, int> relation_ids;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.rfind(kRelationsHeader, 0) == 0) {
      if (have_header) throw DataError(where + ": duplicate #relations header");
      data.relation_names = split(line.substr(std::string(kRelationsHeader).size()), ',');
      if (data.relation_names.empty() || data.relation_names[0] != "NA") {
        throw DataError(where + ": first relation must be NA");
      }
      for (std::size_t i = 0; i < data.relation_names.size(); ++i) {
        if (!relation_ids.emplace(data.relation_names[i], static_cast<int>(i)).second) {
          throw DataError(where + ": duplicate relation name '" + data.relation_names[i] + "'");
        }
      }
      have_header = true;
      continue;
    }
    if (line.empty() || line.rfind("# ", 0) == 0) continue;  // blank or comment
    if (!have_header) throw DataError(where + ": data line before #relations header");

    auto fields = split(line, '\t');
    if (fields.size() != 7) {
      throw DataError(where + ": expected 7 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    Sentence s;
    s.bag_key = fields[0];
    auto rel = relation_ids.find(fields[1]);
    if (rel == relation_ids.end()) {
      throw DataError(where + ": unknown relation '" + fields[1] + "'");
    }
    s.relation = rel->second;
    s.e1 = {parse_index(fields[2], where), parse_index(fields[3], where)};
    s.e2 = {parse_index(fields[4], where), parse_index(fields[5], where)};
    for (auto& tok : split(fields[6], ' ')) {
      if (!tok.empty()) s.tokens.push_back(std::move(tok));
    }
    try {
      validate_sentence(s, data.relation_names.size());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    data.sentences.push_back(std::move(s));
  }
  if (!have_header) throw DataError(source + ": missing #relations header");
  return data;
}

Dataset load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path), path.string());
}

std::string format_dataset(const Dataset& data) {
  std::ostringstream out;
  out << kRelationsHeader;
  for (std::size_t i = 0; i < data.relation_names.size(); ++i) {
    if (i) out << ',';
    out << data.relation_names[i];
  }
  out << '\n';
  for (const auto& s : data.sentences) {
    out << s.bag_key << '\t' << data.relation_names.at(static_cast<std::size_t>(s.relation))
        << '\t' << s.e1.begin << '\t' << s.e1.end << '\t' << s.e2.begin << '\t' << s.e2.end
        << '\t';
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (i) out << ' ';
      out << s.tokens[i];
    }
    out << '\n';
  }
  return out.str();
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_dataset(data);
}

Vocabulary::Vocabulary() {
  add("<PAD>");
  add("<UNK>");
}

void Vocabulary::add(const std::string& token) {
  if (lookup_.emplace(token, static_cast<int>(tokens_.size())).second) tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const Dataset& data, std::size_t min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocabulary: min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : data.sentences) {
    for (const auto& t : s.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, n] : kept) v.add(tok);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (v.contains(t)) throw DataError("duplicate vocabulary token '" + t + "'");
    v.add(t);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // An optional leading "# config = ..." line records provenance.
    if (std::exchange(first, false) && line.rfind("# config = ", 0) == 0) continue;
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : regular_tokens()) out << t << '\n';
}

int Vocabulary::index(const std::string& token) const {
  auto it = lookup_.find(token);
  return it == lookup_.end() ? kUnk : it->second;
}

std::vector<std::string> Vocabulary::regular_tokens() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

int signed_distance(std::size_t k, const Span& span) {
  if (k < span.begin) return static_cast<int>(k) - static_cast<int>(span.begin);
  if (k >= span.end) return static_cast<int>(k) - static_cast<int>(span.end - 1);
  return 0;
}

PositionFeatures position_features(const Sentence& s, int max_dist) {
  PositionFeatures pf;
  pf.to_e1.reserve(s.tokens.size());
  pf.to_e2.reserve(s.tokens.size());
  for (std::size_t k = 0; k < s.tokens.size(); ++k) {
    pf.to_e1.push_back(std::clamp(signed_distance(k, s.e1), -max_dist, max_dist) + max_dist);
    pf.to_e2.push_back(std::clamp(signed_distance(k, s.e2), -max_dist, max_dist) + max_dist);
  }
  return pf;
}

Span truncation_window(const Sentence& s, std::size_t max_len) {
  const std::size_t n = s.tokens.size();
  if (n <= max_len) return {0, n};
  const std::size_t lo = std::min(s.e1.begin, s.e2.begin);
  const std::size_t hi = std::max(s.e1.end, s.e2.end);
  if (hi <= max_len) return {0, max_len};
  if (hi - lo <= max_len) return {hi - max_len, hi};
  // Entities farther apart than the window: keep the leftmost one intact.
  return {lo, lo + max_len};
}

std::vector<int> Batch::labels() const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.label);
  return out;
}

EncodedSentence encode_sentence(const Sentence& s, const Vocabulary& vocab,
                                const EncodingConfig& cfg) {
  const auto pf = position_features(s, cfg.max_dist);
  const Span window = truncation_window(s, cfg.max_len);
  EncodedSentence e;
  e.words.assign(cfg.max_len, Vocabulary::kPad);
  e.pos1.assign(cfg.max_len, cfg.pad_position());
  e.pos2.assign(cfg.max_len, cfg.pad_position());
  e.length = window.width();
  e.label = s.relation;
  for (std::size_t k = 0; k < e.length; ++k) {
    const std::size_t src = window.begin + k;
    e.words[k] = vocab.index(s.tokens[src]);
    e.pos1[k] = pf.to_e1[src];
    e.pos2[k] = pf.to_e2[src];
  }
  return e;
}

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                 const Vocabulary& vocab, const EncodingConfig& cfg) {
  Batch b;
  b.indices = indices;
  b.max_len = cfg.max_len;
  b.rows.reserve(indices.size());
  for (std::size_t i : indices) b.rows.push_back(encode_sentence(data.sentences.at(i), vocab, cfg));
  return b;
}

std::vector<std::vector<std::size_t>> partition_indices(std::size_t m, std::size_t batch_size,
                                                        Rng& rng, bool shuffle) {
  if (batch_size < 1) throw std::invalid_argument("batchify: batch size must be >= 1");
  if (m == 0) throw std::invalid_argument("batchify: empty dataset");
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  if (shuffle) rng.shuffle(order);
  std::vector<std::vector<std::size_t>> parts;
  for (std::size_t start = 0; start < m; start += batch_size) {
    const std::size_t end = std::min(m, start + batch_size);
    parts.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return parts;
}

std::vector<Batch> batchify(const Dataset& data, const Vocabulary& vocab,
                            const EncodingConfig& cfg, std::size_t batch_size, Rng& rng,
                            bool shuffle) {
  std::vector<Batch> out;
  for (auto& idx : partition_indices(data.size(), batch_size, rng, shuffle)) {
    out.push_back(make_batch(data, idx, vocab, cfg));
  }
  return out;
}

std::uint64_t partition_fingerprint(const std::vector<Batch>& batches) {
  // FNV-1a over (batch, index) sequence.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& b : batches) {
    mix(b.indices.size());
    for (auto i : b.indices) mix(i);
  }
  return h;
}

std::string synthetic_trigger(int relation, int variant) {
  return "trig" + std::to_string(relation) + "_" + std::to_string(variant);
}

namespace {

constexpr int kTriggerVariants = 2;
constexpr double kDistractorRate = 0.2;

void append_fillers(std::vector<std::string>& toks, std::size_t count, const SynthSpec& spec,
                    Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    toks.push_back("w" + std::to_string(rng.uniform_int(spec.vocab_size)));
  }
}

Sentence synth_sentence(const SynthSpec& spec, int relation, const std::string& bag_key,
                        const std::string& head, const std::string& tail, bool head_first,
                        Rng& rng) {
  Sentence s;
  s.bag_key = bag_key;
  s.relation = relation;
  auto& toks = s.tokens;

  const bool distract = rng.bernoulli(kDistractorRate);
  const bool distract_left = rng.bernoulli(0.5);
  const int distract_rel = 1 + static_cast<int>(rng.uniform_int(
                                   static_cast<std::uint64_t>(spec.num_relations - 1)));
  auto distractor = [&] {
    return synthetic_trigger(distract_rel,
                             static_cast<int>(rng.uniform_int(kTriggerVariants)));
  };

  append_fillers(toks, rng.uniform_int(4), spec, rng);
  if (distract && distract_left) toks.push_back(distractor());
  const std::size_t first = toks.size();
  toks.push_back(head_first ? head : tail);

  std::vector<std::string> middle;
  append_fillers(middle, 2 + rng.uniform_int(4), spec, rng);
  if (relation != kNaRelation && rng.bernoulli(spec.trigger_strength)) {
    const auto at = rng.uniform_int(middle.size() + 1);
    middle.insert(middle.begin() + static_cast<std::ptrdiff_t>(at),
                  synthetic_trigger(relation, static_cast<int>(rng.uniform_int(kTriggerVariants))));
  }
  toks.insert(toks.end(), middle.begin(), middle.end());
  const std::size_t second = toks.size();
  toks.push_back(head_first ? tail : head);
  if (distract && !distract_left) toks.push_back(distractor());
  append_fillers(toks, rng.uniform_int(4), spec, rng);

  Span a{first, first + 1};
  Span b{second, second + 1};
  s.e1 = head_first ? a : b;
  s.e2 = head_first ? b : a;
  return s;
}

Dataset synth_split(const SynthSpec& spec, std::size_t n, const std::string& prefix, Rng& rng) {
  Dataset d;
  d.relation_names.push_back("NA");
  for (int r = 1; r < spec.num_relations; ++r) d.relation_names.push_back("rel" + std::to_string(r));
  std::size_t bag = 0;
  while (d.sentences.size() < n) {
    const int relation = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.num_relations)));
    const std::size_t bag_size = std::min<std::size_t>(1 + rng.uniform_int(3), n - d.sentences.size());
    const std::string head = prefix + "e" + std::to_string(bag) + "a";
    const std::string tail = prefix + "e" + std::to_string(bag) + "b";
    const std::string key = head + "|" + tail;
    for (std::size_t i = 0; i < bag_size; ++i) {
      d.sentences.push_back(synth_sentence(spec, relation, key, head, tail, rng.bernoulli(0.5), rng));
    }
    ++bag;
  }
  return d;
}

}  // namespace

SynthCorpus generate_synthetic(const SynthSpec& spec, Rng& rng) {
  if (spec.num_relations < 2) throw std::invalid_argument("generate_synthetic: need C >= 2");
  if (!(spec.label_noise_rate >= 0.0 && spec.label_noise_rate < 0.5)) {
    throw std::invalid_argument("generate_synthetic: label noise must be in [0, 0.5)");
  }
  if (spec.trigger_strength < 0.0 || spec.trigger_strength > 1.0) {
    throw std::invalid_argument("generate_synthetic: trigger strength must be in [0, 1]");
  }
  if (spec.vocab_size < 1) throw std::invalid_argument("generate_synthetic: vocab_size must be >= 1");

  Rng train_rng = rng.split(1);
  Rng test_rng = rng.split(2);
  Rng noise_rng = rng.split(3);

  SynthCorpus out;
  out.train = synth_split(spec, spec.n_train, "tr", train_rng);
  out.test = synth_split(spec, spec.n_test, "te", test_rng);
  const auto c = static_cast<std::uint64_t>(spec.num_relations);
  for (auto& s : out.train.sentences) {
    if (noise_rng.bernoulli(spec.label_noise_rate)) {
      // Uniform over the other C-1 labels so every draw is a real corruption.
      const int shift = 1 + static_cast<int>(noise_rng.uniform_int(c - 1));
      s.relation = (s.relation + shift) % spec.num_relations;
      ++out.corrupted;
    }
  }
  return out;
}

}  // namespace boostedseq
