#include "boostedseq/config.hpp"

#include <fstream>
#include <functional>

#include "json.hpp"

namespace boostedseq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || v[0] == '-') {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return n;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T>
Setter uint_field(T RunConfig::*group, std::size_t T::*field) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*group).*field = static_cast<std::size_t>(to_uint(k, v));
  };
}

template <class T>
Setter double_field(T RunConfig::*group, double T::*field) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*group).*field = to_double(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.boost.seed = to_uint(k, v); }},
      {"rounds", [](RunConfig& c, auto& k, auto& v) { c.boost.rounds = to_uint(k, v); }},
      {"samme", [](RunConfig& c, auto& k, auto& v) { c.boost.samme = to_bool(k, v); }},
      {"train", [](RunConfig& c, auto&, auto& v) { c.train_path = v; }},
      {"test", [](RunConfig& c, auto&, auto& v) { c.test_path = v; }},
      {"vectors", [](RunConfig& c, auto&, auto& v) { c.vectors_path = v; }},
      {"out", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
      {"checkpoint", [](RunConfig& c, auto&, auto& v) { c.checkpoint_path = v; }},
      {"mode", [](RunConfig& c, auto&, auto& v) { c.modes = parse_modes(v); }},
      {"bag_aggregate",
       [](RunConfig& c, auto&, auto& v) { c.bag_aggregate = parse_bag_aggregate(v); }},
      {"min_count", [](RunConfig& c, auto& k, auto& v) { c.min_count = to_uint(k, v); }},
      {"threads", uint_field(&RunConfig::train, &TrainConfig::threads)},
      {"epochs_per_round", uint_field(&RunConfig::train, &TrainConfig::epochs_per_round)},
      {"batch_size", uint_field(&RunConfig::train, &TrainConfig::batch_size)},
      {"learning_rate", double_field(&RunConfig::train, &TrainConfig::learning_rate)},
      {"l2_lambda", double_field(&RunConfig::train, &TrainConfig::l2_lambda)},
      {"beta1", double_field(&RunConfig::train, &TrainConfig::beta1)},
      {"beta2", double_field(&RunConfig::train, &TrainConfig::beta2)},
      {"adam_epsilon", double_field(&RunConfig::train, &TrainConfig::adam_epsilon)},
      {"dropout", double_field(&RunConfig::train, &TrainConfig::dropout)},
      {"lstm_dim", uint_field(&RunConfig::train, &TrainConfig::lstm_dim)},
      {"lstm_layers", uint_field(&RunConfig::train, &TrainConfig::lstm_layers)},
      {"unrolled_steps", uint_field(&RunConfig::train, &TrainConfig::unrolled_steps)},
      {"word_dim", uint_field(&RunConfig::train, &TrainConfig::word_dim)},
      {"pos_dim", uint_field(&RunConfig::train, &TrainConfig::pos_dim)},
      {"max_dist",
       [](RunConfig& c, auto& k, auto& v) { c.train.max_dist = static_cast<int>(to_uint(k, v)); }},
      {"grad_clip", double_field(&RunConfig::train, &TrainConfig::grad_clip)},
      {"lr_mode", [](RunConfig& c, auto&, auto& v) { c.train.lr_mode = parse_lr_mode(v); }},
      {"optimizer",
       [](RunConfig& c, auto&, auto& v) { c.train.optimizer = parse_optimizer(v); }},
      {"synth_relations",
       [](RunConfig& c, auto& k, auto& v) { c.synth.num_relations = static_cast<int>(to_uint(k, v)); }},
      {"synth_train", uint_field(&RunConfig::synth, &SynthSpec::n_train)},
      {"synth_test", uint_field(&RunConfig::synth, &SynthSpec::n_test)},
      {"synth_vocab", uint_field(&RunConfig::synth, &SynthSpec::vocab_size)},
      {"synth_trigger_strength", double_field(&RunConfig::synth, &SynthSpec::trigger_strength)},
      {"synth_label_noise", double_field(&RunConfig::synth, &SynthSpec::label_noise_rate)},
  };
  return table;
}

}  // namespace

std::vector<SelectMode> parse_modes(const std::string& csv) {
  std::vector<SelectMode> modes;
  std::string cur;
  for (std::size_t i = 0; i <= csv.size(); ++i) {
    if (i == csv.size() || csv[i] == ',') {
      const std::string m = trim(cur);
      if (!m.empty()) modes.push_back(parse_select_mode(m));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(csv[i]))));
    }
  }
  if (modes.empty()) throw ConfigError("mode: at least one of one,two,all is required");
  return modes;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : setters()) out.push_back(name);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second(*this, key, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::validate() const {
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (boost.rounds < 1) throw ConfigError("rounds: must be >= 1");
  if (min_count < 1) throw ConfigError("min_count: must be >= 1");
}

std::filesystem::path RunConfig::checkpoint() const {
  if (!checkpoint_path.empty()) return checkpoint_path;
  return std::filesystem::path(out_dir) / "ensemble.ckpt";
}

std::string RunConfig::echo() const {
  nlohmann::json j;
  j["seed"] = boost.seed;
  j["rounds"] = boost.rounds;
  j["samme"] = boost.samme;
  j["train"] = train_path;
  j["test"] = test_path;
  j["vectors"] = vectors_path;
  j["out"] = out_dir;
  j["checkpoint"] = checkpoint().string();
  std::string modes_csv;
  for (auto m : modes) modes_csv += (modes_csv.empty() ? "" : ",") + to_string(m);
  j["mode"] = modes_csv;
  j["bag_aggregate"] = to_string(bag_aggregate);
  j["min_count"] = min_count;
  j["threads"] = train.threads;
  j["epochs_per_round"] = train.epochs_per_round;
  j["batch_size"] = train.batch_size;
  j["learning_rate"] = train.learning_rate;
  j["l2_lambda"] = train.l2_lambda;
  j["beta1"] = train.beta1;
  j["beta2"] = train.beta2;
  j["adam_epsilon"] = train.adam_epsilon;
  j["dropout"] = train.dropout;
  j["lstm_dim"] = train.lstm_dim;
  j["lstm_layers"] = train.lstm_layers;
  j["unrolled_steps"] = train.unrolled_steps;
  j["word_dim"] = train.word_dim;
  j["pos_dim"] = train.pos_dim;
  j["max_dist"] = train.max_dist;
  j["grad_clip"] = train.grad_clip;
  j["lr_mode"] = to_string(train.lr_mode);
  j["optimizer"] = to_string(train.optimizer);
  j["synth_relations"] = synth.num_relations;
  j["synth_train"] = synth.n_train;
  j["synth_test"] = synth.n_test;
  j["synth_vocab"] = synth.vocab_size;
  j["synth_trigger_strength"] = synth.trigger_strength;
  j["synth_label_noise"] = synth.label_noise_rate;
  return j.dump();
}

}  // namespace boostedseq
